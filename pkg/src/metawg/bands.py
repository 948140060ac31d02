"""Band structure of the resonator-loaded lattice.

Conventions
-----------
Circuit phasors use ``exp(+i omega t)``, so a resonator with series loss has its
pole shifted to ``omega0 + i gamma/2``.  Complex Bloch wavenumbers returned as
:class:`ComplexK` are reported as ``(phase, attenuation)`` with the attenuation
non-negative: ``ComplexK.im = 1 / localization length``.  Group indices follow
the phasor convention, ``n_g = c dk/domega`` for the forward wave
``exp(i omega t - i k x)``; at a lossy upper band edge ``Im n_g > 0``.

Loss rates ``gamma_i`` are energy decay rates, ``Q_i = omega0 / gamma_i``.  The
closed-form band-edge expressions (:func:`edge_group_index`) take the pole
shift that enters ``delta - i gamma`` directly; for a resonator of quality
``Q_i`` that shift is ``gamma_i / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import (
    CapacitiveCell,
    EffectiveParams,
    WaveguideSpec,
    bare_dispersion,
    coupling_g,
    derive_effective,
    gap_ratio,
    loaded_line,
)
from .constants import C_LIGHT
from .errors import DomainError, InvalidParameterError

__all__ = [
    "BandPoint",
    "BandEdges",
    "ComplexK",
    "rwa_bands",
    "exact_bands",
    "brute_force_bands",
    "band_edges",
    "inverse_dispersion",
    "bloch_k",
    "edge_expansion",
    "group_index",
    "edge_group_index",
    "circuit_dispersion",
    "k_grid",
    "dispersion_context",
]


@dataclass(frozen=True)
class BandPoint:
    k: float
    omega_plus: float
    omega_minus: float
    weights_plus: tuple[float, float]
    weights_minus: tuple[float, float]


@dataclass(frozen=True)
class BandEdges:
    omega_c_minus: float
    omega_c_plus: float
    delta: float
    omega_mid: float

    @classmethod
    def from_edges(cls, lower: float, upper: float) -> "BandEdges":
        return cls(lower, upper, upper - lower, 0.5 * (upper + lower))


@dataclass(frozen=True)
class ComplexK:
    """Complex Bloch wavenumber; ``re`` is the phase constant, ``im`` the attenuation."""

    re: float
    im: float

    @property
    def diverges(self):
        return np.isinf(self.re) | np.isinf(self.im)

    @property
    def localization_length(self):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(self.im, dtype=float)

    def __complex__(self):
        return complex(self.re, self.im)


def k_grid(d: float, points: int = 1001) -> np.ndarray:
    """Uniform grid over the half Brillouin zone [0, pi/d]."""
    return np.linspace(0.0, math.pi / d, points)


def rwa_bands(k: float, eff: EffectiveParams, cell) -> BandPoint:
    """Polariton bands and mode weights in the rotating-wave approximation."""
    omega_k = bare_dispersion(k, eff, cell)
    g = coupling_g(k, eff, cell)
    w0 = eff.omega0
    root = math.sqrt((omega_k - w0) ** 2 + 4.0 * g * g)
    plus = 0.5 * ((omega_k + w0) + root)
    minus = 0.5 * ((omega_k + w0) - root)

    def weights(omega):
        a, b = omega - w0, g
        norm = math.hypot(a, b)
        if norm == 0.0:
            # uncoupled branch sitting exactly on the resonator
            return (0.0, 1.0)
        return (a / norm, b / norm)

    return BandPoint(float(k), plus, minus, weights(plus), weights(minus))


def exact_bands(k, eff: EffectiveParams, cell):
    """Bogoliubov (beyond-RWA) band frequencies ``(omega_plus, omega_minus)``."""
    omega_k = np.asarray(bare_dispersion(k, eff, cell), dtype=float)
    g = np.asarray(coupling_g(k, eff, cell), dtype=float)
    w0 = eff.omega0
    s = omega_k**2 + w0**2
    disc = np.sqrt((omega_k**2 - w0**2) ** 2 + 16.0 * w0 * omega_k * g**2)
    plus2 = 0.5 * (s + disc)
    # cancellation-free lower root: product of roots is Omega^2 w0^2 - 4 w0 Omega g^2
    prod = omega_k**2 * w0**2 - 4.0 * w0 * omega_k * g**2
    if np.any(prod < -1e-12 * plus2**2):
        raise InvalidParameterError("over-coupled cell: lower band frequency squared is negative")
    minus2 = np.clip(prod, 0.0, None) / plus2
    plus, minus = np.sqrt(plus2), np.sqrt(minus2)
    if plus.ndim == 0:
        return float(plus), float(minus)
    return plus, minus


def _bogoliubov_matrix(omega_k: float, g: float, w0: float) -> np.ndarray:
    return np.array(
        [
            [omega_k, 0.0, g, -g],
            [0.0, omega_k, -g, g],
            [g, -g, w0, 0.0],
            [-g, g, 0.0, w0],
        ]
    )


_J = np.diag([1.0, -1.0, 1.0, -1.0])


def brute_force_bands(k: float, eff: EffectiveParams, cell, return_spectrum: bool = False):
    """Bands from dense eigenvalues of J H_k (independent of :func:`exact_bands`).

    The spectrum of J H_k is {+-omega_plus, +-omega_minus}; the two non-negative
    values are returned, largest first.
    """
    omega_k = bare_dispersion(k, eff, cell)
    g = coupling_g(k, eff, cell)
    h = _bogoliubov_matrix(omega_k, g, eff.omega0)
    try:
        lam = np.linalg.eigvals(_J @ h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ArithmeticError(f"eigen-decomposition failed at k={k}") from exc
    lam = np.sort(lam.real)
    if return_spectrum:
        return lam
    return float(lam[3]), float(max(lam[2], 0.0))


def band_edges(eff: EffectiveParams, cell) -> BandEdges:
    """Cut-off frequencies omega_c+ = omega0 and omega_c- = omega0 sqrt(1 - 4 g^2 / (Omega omega0))."""
    ratio = gap_ratio(eff, cell)
    if ratio >= 1.0:
        raise InvalidParameterError(f"gap ratio {ratio:.4g} >= 1: the gap reaches zero frequency")
    upper = eff.omega0
    lower = eff.omega0 * math.sqrt(1.0 - ratio)
    return BandEdges.from_edges(lower, upper)


def _lossy_edges_sq(omega, edges: BandEdges, gamma_i: float):
    # both cut-offs scale as 1/sqrt(Lr); series loss maps Lr -> Lr (1 - i gamma/omega)
    factor = 1.0 / (1.0 - 1j * gamma_i / omega) if gamma_i else 1.0
    return edges.omega_c_plus**2 * factor, edges.omega_c_minus**2 * factor


def _forward(k_eng):
    """Pick the forward/decaying root of a +-k pair and convert to (phase, attenuation)."""
    k_eng = np.where(k_eng.imag > 0, -k_eng, k_eng)
    out = np.conj(k_eng)
    # lossless stop bands leave the sign of the phase arbitrary
    return np.where(out.real < 0, np.abs(out.real) + 1j * out.imag, out)


def _k_from_cos(cos_kd, d):
    return _forward(np.arccos(np.asarray(cos_kd, dtype=complex)) / d)


def _bare_omega_sq(omega, edges: BandEdges, gamma_i: float):
    """Omega^2 of the bare lattice mode that hybridizes to frequency ``omega``."""
    wp2, wm2 = _lossy_edges_sq(omega, edges, gamma_i)
    w2 = omega * omega
    return w2 * (w2 - wp2) / (w2 - wm2)


def bloch_k(omega, edges: BandEdges, spec: WaveguideSpec, gamma_i: float = 0.0, lattice: bool = True):
    """Complex Bloch wavenumber as a numpy complex array (``re`` phase, ``im`` attenuation).

    ``spec.n`` must be the index of the bare lattice mode, n = c sqrt(L0 C0') / d,
    i.e. the line returned by :func:`metawg.circuit.loaded_line`.  With
    ``lattice=True`` the bare mode is inverted through its sine dispersion,
    which makes the result exact for the discrete cascade; ``lattice=False``
    uses the linear (continuum) bare dispersion.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("omega must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        big_omega_sq = _bare_omega_sq(omega.astype(complex), edges, gamma_i)
        if lattice:
            omega_max_sq = (2.0 * C_LIGHT / (spec.n * spec.d)) ** 2
            k = _k_from_cos(1.0 - 2.0 * big_omega_sq / omega_max_sq, spec.d)
        else:
            k = _forward(spec.n / C_LIGHT * np.sqrt(big_omega_sq))
    pole = ~np.isfinite(big_omega_sq)
    if np.any(pole):
        k = np.where(pole, complex(np.inf, np.inf), k)
    return k


def inverse_dispersion(omega, edges: BandEdges, spec: WaveguideSpec, gamma_i: float = 0.0,
                       lattice: bool = True) -> ComplexK:
    """Wavenumber at frequency ``omega``; see :func:`bloch_k` for conventions.

    At the lower cut-off of a lossless structure the wavenumber diverges and
    both components are ``inf``.
    """
    k = bloch_k(omega, edges, spec, gamma_i, lattice)
    if k.ndim == 0:
        k = complex(k)
        return ComplexK(k.real, k.imag)
    return ComplexK(k.real, k.imag)


def _nearest_edge(omega, edges: BandEdges, edge: str | None):
    if edge is None:
        edge = "lower" if abs(omega - edges.omega_c_minus) < abs(omega - edges.omega_c_plus) else "upper"
    if edge not in ("lower", "upper"):
        raise ValueError(f"edge must be 'lower' or 'upper', got {edge!r}")
    return edge


def edge_expansion(omega: float, edges: BandEdges, spec: WaveguideSpec, edge: str | None = None,
                   check_window: bool = False) -> float:
    """Leading-order band-edge wavenumber.

    Lower edge: k = (n wc-/c) sqrt(Delta / -delta-); upper edge: k = (n wc+/c) sqrt(delta+/Delta).
    The expansion is meant for |delta| < Delta/10; pass ``check_window=True``
    to enforce that.
    """
    edge = _nearest_edge(omega, edges, edge)
    big_delta = edges.delta
    if edge == "lower":
        detuning = omega - edges.omega_c_minus
        if detuning >= 0:
            raise DomainError("lower-edge expansion needs omega below omega_c-")
        value = spec.n * edges.omega_c_minus / C_LIGHT * math.sqrt(big_delta / -detuning)
    else:
        detuning = omega - edges.omega_c_plus
        if detuning < 0:
            raise DomainError("upper-edge expansion needs omega at or above omega_c+")
        value = spec.n * edges.omega_c_plus / C_LIGHT * math.sqrt(detuning / big_delta)
    if check_window and abs(detuning) >= big_delta / 10:
        raise DomainError("detuning outside the expansion window |delta| < Delta/10")
    return value


def edge_group_index(omega: float, edges: BandEdges, spec: WaveguideSpec, gamma: float = 0.0,
                     edge: str | None = None) -> complex:
    """Closed-form band-edge group index with loss entering as ``delta - i gamma``.

    Returns ``inf`` for a lossless structure exactly at the edge.
    """
    edge = _nearest_edge(omega, edges, edge)
    big_delta = edges.delta
    if edge == "lower":
        z = complex(omega - edges.omega_c_minus, -gamma)
        if z == 0:
            return complex(math.inf, 0.0)
        return spec.n * edges.omega_c_minus * math.sqrt(big_delta) / np.sqrt(-4.0 * z**3)
    z = complex(omega - edges.omega_c_plus, -gamma)
    if z == 0:
        return complex(math.inf, 0.0)
    return spec.n * edges.omega_c_plus / np.sqrt(4.0 * big_delta * z)


def group_index(omega, edges: BandEdges, spec: WaveguideSpec, gamma_i: float = 0.0, lattice: bool = True):
    """Complex group index c dk/domega from the analytic derivative of :func:`bloch_k`.

    Valid across the whole spectrum, not only near the edges.  Diverges
    (``inf``) at a lossless band edge.
    """
    omega = np.asarray(omega, dtype=float)
    w = omega.astype(complex)
    a0, b0 = edges.omega_c_plus**2, edges.omega_c_minus**2
    if gamma_i:
        s = 1.0 / (1.0 - 1j * gamma_i / w)
        ds = -1j * gamma_i / (w - 1j * gamma_i) ** 2
    else:
        s, ds = 1.0, 0.0
    a, b = a0 * s, b0 * s
    da, db = a0 * ds, b0 * ds
    w2 = w * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (w2 - a) / (w2 - b)
        dratio = ((2 * w - da) * (w2 - b) - (w2 - a) * (2 * w - db)) / (w2 - b) ** 2
        big_sq = w2 * ratio
        dbig_sq = 2 * w * ratio + w2 * dratio
        k_phys = bloch_k(omega, edges, spec, gamma_i, lattice)
        k_eng = np.conj(k_phys)
        if lattice:
            omega_max_sq = (2.0 * C_LIGHT / (spec.n * spec.d)) ** 2
            # cos(kd) = 1 - 2 Omega^2 / Omega_max^2
            dk = 2.0 * dbig_sq / (omega_max_sq * spec.d * np.sin(k_eng * spec.d))
        else:
            dk = k_eng * (1.0 / w + dratio / (2.0 * ratio))
        ng = C_LIGHT * dk
    ng = np.where(np.isfinite(ng), ng, complex(np.inf, 0.0))
    return complex(ng) if ng.ndim == 0 else ng


def circuit_dispersion(omega, spec: WaveguideSpec, omega0: float, gamma_e: float, gamma_i: float = 0.0,
                       discrete: bool = True):
    """Dispersion of a line periodically loaded with resonators (telegrapher model).

    Continuum: k^2 = (omega n / c)^2 [1 + (2 c gamma_e / n d) / (omega0^2 - omega^2 + i omega gamma_i)].
    Discrete: cos(kd) = 1 - (omega n d / c)^2 / 2 - (n d gamma_e / c) omega^2 / (omega0^2 - omega^2 + i omega gamma_i).

    Stop bands come back as evanescent wavenumbers.  Returns a :class:`ComplexK`.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("omega must be positive")
    w = omega.astype(complex)
    pole = omega0**2 - w * w + 1j * w * gamma_i
    with np.errstate(divide="ignore", invalid="ignore"):
        if discrete:
            cos_kd = (
                1.0
                - 0.5 * (w * spec.n * spec.d / C_LIGHT) ** 2
                - spec.n * spec.d * gamma_e / C_LIGHT * w * w / pole
            )
            k = _k_from_cos(cos_kd, spec.d)
        else:
            k_sq = (w * spec.n / C_LIGHT) ** 2 * (1.0 + 2.0 * C_LIGHT * gamma_e / (spec.n * spec.d) / pole)
            k = _forward(np.sqrt(k_sq))
    k = np.where(pole == 0, complex(np.inf, np.inf), k)
    if k.ndim == 0:
        k = complex(k)
    return ComplexK(np.real(k), np.imag(k))


def dispersion_context(cell: CapacitiveCell):
    """``(edges, line)`` pair describing the exact dispersion of a capacitive cell."""
    eff = derive_effective(cell)
    return band_edges(eff, cell), loaded_line(cell)
