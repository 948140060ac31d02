"""Finite cascades of unit cells: ABCD matrices, S-parameters, port impedance, LDOS.

Each cell is realized as a symmetric T-section: L0/2 in series, a shunt node
carrying C0 and the resonator branch (Ck in series with Lr || Cr), then L0/2.
Resonator loss is a resistance R = gamma_i * Lr in series with Lr, which gives
the isolated resonator a quality factor omega0 / gamma_i.

Frequencies are angular unless a name says otherwise (``freq`` is in Hz).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .circuit import CapacitiveCell
from .errors import DomainError

__all__ = [
    "FiniteWaveguide",
    "SParamTrace",
    "abcd_cell",
    "cascade",
    "bloch_phase",
    "image_impedance",
    "simulate_s21",
    "input_impedance",
    "ldos",
    "mode_frequencies",
    "retrieve_bloch_phase",
    "stop_band_edges",
]


@dataclass(frozen=True)
class FiniteWaveguide:
    """An ordered cascade of cells between two resistive ports."""

    cells: tuple[CapacitiveCell, ...]
    gamma_i: float = 0.0
    port_in: float = 50.0
    port_out: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if self.gamma_i < 0:
            raise DomainError("gamma_i must be non-negative")
        if not (self.port_in > 0 and self.port_out > 0):
            raise DomainError("port impedances must be positive")

    @classmethod
    def uniform(cls, cell: CapacitiveCell, n_cells: int, **kwargs) -> "FiniteWaveguide":
        return cls(cells=(cell,) * n_cells, **kwargs)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def length(self) -> float:
        return sum(c.d for c in self.cells)


@dataclass
class SParamTrace:
    """Frequency sweep of transmission (and optionally reflection)."""

    freq: np.ndarray
    s21: np.ndarray
    s11: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.s11 is not None:
            self.s11 = np.asarray(self.s11, dtype=complex)
            if self.s11.shape != self.freq.shape:
                raise ValueError("s11 and freq lengths differ")
        if self.s21.shape != self.freq.shape:
            raise ValueError("s21 and freq lengths differ")
        if self.freq.size > 1 and np.any(np.diff(self.freq) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * math.pi * self.freq

    def s21_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.s21))

    def window(self, f_lo: float, f_hi: float) -> "SParamTrace":
        sel = (self.freq >= f_lo) & (self.freq <= f_hi)
        s11 = None if self.s11 is None else self.s11[sel]
        return SParamTrace(self.freq[sel], self.s21[sel], s11, dict(self.meta))


def _abcd_elements(omega, c0, l0, cr, lr, ck, gamma_i):
    """Broadcasting ABCD entries (A, B, C) of the symmetric T-section; D equals A."""
    w = np.asarray(omega, dtype=complex)
    s = 1j * w
    z_half = 0.5 * s * l0
    z_lr = s * lr + gamma_i * lr
    y_res = s * cr + 1.0 / z_lr
    y_k = s * ck
    with np.errstate(divide="ignore", invalid="ignore"):
        # infinite exactly at the lossless series resonance of the branch (a short)
        y_branch = y_k * y_res / (y_k + y_res)
    y = s * c0 + y_branch
    a = 1.0 + z_half * y
    b = z_half * (2.0 + z_half * y)
    return a, b, y


def abcd_cell(omega, cell: CapacitiveCell, gamma_i: float = 0.0) -> np.ndarray:
    """ABCD matrix of one cell; shape ``omega.shape + (2, 2)``. Accepts complex omega."""
    a, b, c = _abcd_elements(omega, cell.c0, cell.l0, cell.cr, cell.lr, cell.ck, gamma_i)
    out = np.empty(np.shape(a) + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = c
    out[..., 1, 1] = a
    return out


def cascade(wg: FiniteWaveguide, omega) -> np.ndarray:
    """Total ABCD matrix of the cascade (input side first)."""
    omega = np.asarray(omega)
    total = np.broadcast_to(np.eye(2, dtype=complex), omega.shape + (2, 2)).copy()
    cache = {}
    for cell in wg.cells:
        m = cache.get(cell)
        if m is None:
            m = cache[cell] = abcd_cell(omega, cell, wg.gamma_i)
        total = total @ m
    return total


def bloch_phase(omega, cell: CapacitiveCell, gamma_i: float = 0.0) -> np.ndarray:
    """k d of the infinite periodic cascade from arccos(trace / 2).

    Same branch conventions as :mod:`metawg.bands` (non-negative attenuation).
    """
    from .bands import _k_from_cos

    a, _, _ = _abcd_elements(omega, cell.c0, cell.l0, cell.cr, cell.lr, cell.ck, gamma_i)
    return _k_from_cos(a, 1.0)


def image_impedance(omega, cell: CapacitiveCell, gamma_i: float = 0.0):
    """Bloch (image) impedance sqrt(B/C) of the symmetric cell, branch with Re >= 0.

    Inside a lossless stop band the value is purely reactive; its sign is then
    fixed so that a semi-infinite cascade terminated by it decays.
    """
    a, b, c = _abcd_elements(omega, cell.c0, cell.l0, cell.cr, cell.lr, cell.ck, gamma_i)
    kd = bloch_phase(omega, cell, gamma_i)
    # forward wave exp(-i k_eng x) with k_eng = conj(kd); Z_B = B / (i sin(k_eng d))
    k_eng = np.conj(kd)
    with np.errstate(divide="ignore", invalid="ignore"):
        return b / (1j * np.sin(k_eng))


def _load_terms(z_load):
    if z_load is None or (np.isscalar(z_load) and np.isinf(z_load)):
        return None
    return z_load


def input_impedance(wg: FiniteWaveguide, omega, load=math.inf):
    """Impedance looking into the input of the cascade terminated by ``load``.

    ``load=inf`` (or ``None``) is an open circuit.
    """
    m = cascade(wg, omega)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    z_load = _load_terms(load)
    with np.errstate(divide="ignore", invalid="ignore"):
        if z_load is None:
            z = a / c
        else:
            z = (a * z_load + b) / (c * z_load + d)
    return complex(z) if np.ndim(z) == 0 else z


def simulate_s21(wg: FiniteWaveguide, freqs: Sequence[float]) -> SParamTrace:
    """Forward-model S21 and S11 of the cascade between its resistive ports (freqs in Hz)."""
    freqs = np.asarray(freqs, dtype=float)
    if np.any(freqs <= 0):
        raise DomainError("frequencies must be positive")
    m = cascade(wg, 2.0 * math.pi * freqs)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    z1, z2 = wg.port_in, wg.port_out
    denom = a * z2 + b + c * z1 * z2 + d * z1
    with np.errstate(divide="ignore", invalid="ignore"):
        s21 = 2.0 * math.sqrt(z1 * z2) / denom
        s11 = (a * z2 + b - c * z1 * z2 - d * z1) / denom
    # a lossless shunt branch exactly at its pole shorts the line
    shorted = ~(np.isfinite(s21) & np.isfinite(s11))
    if np.any(shorted):
        s21 = np.where(shorted, 0.0, s21)
        s11 = np.where(shorted, -1.0, s11)
    return SParamTrace(freqs, s21, s11)


def ldos(wg: FiniteWaveguide, omega, load=math.inf):
    """Normalized local density of states at the input port.

    Computed as Re[Z_in] of the cascade (the response probed by a weak
    capacitive coupler, so an open input is the unperturbed boundary) divided by
    the image impedance of the bare line built from the first cell's L0 and C0.
    A matched bare line therefore gives exactly 1.
    """
    z_in = np.asarray(input_impedance(wg, omega, load))
    ref = wg.cells[0]
    bare = ref.replace(ck=ref.ck * 1e-30)
    z_bare = np.real(image_impedance(omega, bare))
    out = np.real(z_in) / z_bare
    return float(out) if out.ndim == 0 else out


def mode_frequencies(wg: FiniteWaveguide) -> np.ndarray:
    """Eigenfrequencies of the lossless cascade with both ends open (rad/s, ascending).

    Independent nodal-analysis oracle: flux variables on the N shunt nodes and N
    resonator nodes; the dangling end half-inductors carry no current.
    """
    n = wg.n_cells
    cap = np.zeros((2 * n, 2 * n))
    inv_l = np.zeros((2 * n, 2 * n))
    for i, cell in enumerate(wg.cells):
        a, r = i, n + i
        cap[a, a] += cell.c0 + cell.ck
        cap[r, r] += cell.cr + cell.ck
        cap[a, r] -= cell.ck
        cap[r, a] -= cell.ck
        inv_l[r, r] += 1.0 / cell.lr
        if i + 1 < n:
            # two half-sections in series between neighbouring shunt nodes
            l_link = 0.5 * (cell.l0 + wg.cells[i + 1].l0)
            b = i + 1
            inv_l[a, a] += 1.0 / l_link
            inv_l[b, b] += 1.0 / l_link
            inv_l[a, b] -= 1.0 / l_link
            inv_l[b, a] -= 1.0 / l_link
    w2 = scipy.linalg.eigh(inv_l, cap, eigvals_only=True)
    return np.sqrt(np.clip(w2, 0.0, None))


def retrieve_bloch_phase(trace: SParamTrace, n_cells: int, port: float = 50.0) -> np.ndarray:
    """Per-cell Bloch phase k d recovered from the S-parameters of a symmetric N-cell device.

    The total ABCD element A of N identical symmetric cells is cos(N k d); it is
    rebuilt from S11 and S21 (equal reference impedances, S22 = S11, S12 = S21).
    The real part is only determined modulo 2 pi / N; the attenuation per cell
    (imaginary part) is unambiguous.
    """
    if trace.s11 is None:
        raise DomainError("retrieval needs S11 as well as S21")
    if n_cells < 1:
        raise DomainError("n_cells must be positive")
    s11, s21 = trace.s11, trace.s21
    blocked = s21 == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a_total = ((1.0 + s11) * (1.0 - s11) + s21 * s21) / (2.0 * np.where(blocked, 1.0, s21))
    from .bands import _k_from_cos

    kd = _k_from_cos(a_total, float(n_cells))
    return np.where(blocked, complex(0.0, math.inf), kd)


def stop_band_edges(trace: SParamTrace, n_cells: int, port: float = 50.0, tol: float = 1e-6) -> tuple[float, float]:
    """Frequencies (Hz) bounding the stop band that contains the deepest |S21| point.

    A sample is in a stop band when the retrieved attenuation per cell exceeds
    ``tol`` (nepers); meant for loss-free traces.
    """
    attenuation = np.imag(retrieve_bloch_phase(trace, n_cells, port))
    stop = attenuation > tol
    i0 = int(np.argmin(np.abs(trace.s21)))
    if not stop[i0]:
        raise DomainError("the deepest |S21| point is not inside a stop band")
    lo = i0
    while lo > 0 and stop[lo - 1]:
        lo -= 1
    hi = i0
    while hi < stop.size - 1 and stop[hi + 1]:
        hi += 1
    # edges halfway between the last pass-band and first stop-band samples
    f = trace.freq
    f_lo = 0.5 * (f[lo - 1] + f[lo]) if lo > 0 else f[0]
    f_hi = 0.5 * (f[hi] + f[hi + 1]) if hi < f.size - 1 else f[-1]
    return float(f_lo), float(f_hi)
