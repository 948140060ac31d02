"""Lumped-element unit cells of a resonator-loaded waveguide.

All quantities are SI and all frequencies are angular (rad/s).  Two cell
topologies are supported: a resonator hanging off the line through a coupling
capacitor (``CapacitiveCell``) and a resonator inserted in series with the line
through a shared coupling inductor (``InductiveCell``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .constants import C_LIGHT
from .errors import DomainError

__all__ = [
    "WaveguideSpec",
    "CapacitiveCell",
    "InductiveCell",
    "EffectiveParams",
    "derive_effective",
    "bare_dispersion",
    "coupling_g",
    "gap_ratio",
    "resonator_port_params",
    "cell_from_spec",
    "loaded_line",
    "continuum_gap",
]


def _require_positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be strictly positive and finite, got {value!r}")


@dataclass(frozen=True)
class WaveguideSpec:
    """Unloaded transmission line: characteristic impedance, index, lattice constant."""

    z0: float
    n: float
    d: float

    def __post_init__(self):
        _require_positive(z0=self.z0, n=self.n, d=self.d)


@dataclass(frozen=True)
class CapacitiveCell:
    """One period of a line loaded by a capacitively coupled LC resonator.

    Parameters
    ----------
    c0, l0 : float
        Shunt capacitance [F] and series inductance [H] of the line per period.
    cr, lr : float
        Resonator capacitance [F] and inductance [H].
    ck : float
        Coupling capacitance [F] between the line node and the resonator node.
    d : float
        Lattice constant [m].
    """

    c0: float
    l0: float
    cr: float
    lr: float
    ck: float
    d: float

    def __post_init__(self):
        _require_positive(c0=self.c0, l0=self.l0, cr=self.cr, lr=self.lr, ck=self.ck, d=self.d)

    @classmethod
    def from_spec(cls, spec: WaveguideSpec, cr: float, lr: float, ck: float) -> "CapacitiveCell":
        l0, c0 = cell_from_spec(spec)
        return cls(c0=c0, l0=l0, cr=cr, lr=lr, ck=ck, d=spec.d)

    def replace(self, **changes) -> "CapacitiveCell":
        fields = dict(c0=self.c0, l0=self.l0, cr=self.cr, lr=self.lr, ck=self.ck, d=self.d)
        fields.update(changes)
        return CapacitiveCell(**fields)


@dataclass(frozen=True)
class InductiveCell:
    """One period of a line with a series resonator shunted by a coupling inductor ``lk``."""

    c0: float
    l0: float
    cr: float
    lr: float
    lk: float
    d: float

    def __post_init__(self):
        _require_positive(c0=self.c0, l0=self.l0, cr=self.cr, lr=self.lr, lk=self.lk, d=self.d)


Cell = Union[CapacitiveCell, InductiveCell]


@dataclass(frozen=True)
class EffectiveParams:
    """Renormalized element values of the quantized cell.

    ``x0p``, ``xrp``, ``xkp`` are C0', Cr', Ck' for the capacitive variant and
    L0', Lr', Lk' for the inductive one.
    """

    x0p: float
    xrp: float
    xkp: float
    omega0: float
    variant: str


def derive_effective(cell: Cell) -> EffectiveParams:
    """Effective capacitances (or inductances) and the loaded resonator frequency."""
    if isinstance(cell, CapacitiveCell):
        a, b, k = cell.c0, cell.cr, cell.ck
        variant = "capacitive"
    elif isinstance(cell, InductiveCell):
        a, b, k = cell.l0, cell.lr, cell.lk
        variant = "inductive"
    else:
        raise TypeError(f"unsupported cell type {type(cell).__name__}")
    num = k * b + k * a + a * b
    x0p = num / (k + b)
    xrp = num / (k + a)
    xkp = num / k
    if variant == "capacitive":
        omega0 = 1.0 / math.sqrt(cell.lr * xrp)
    else:
        omega0 = 1.0 / math.sqrt(cell.cr * xrp)
    return EffectiveParams(x0p=x0p, xrp=xrp, xkp=xkp, omega0=omega0, variant=variant)


def _line_product(eff: EffectiveParams, cell: Cell) -> float:
    # L0*C0' (capacitive) or C0*L0' (inductive)
    if eff.variant == "capacitive":
        return cell.l0 * eff.x0p
    return cell.c0 * eff.x0p


def bare_dispersion(k, eff: EffectiveParams, cell: Cell):
    """Frequency of the bare (resonator-free) lattice mode at wavenumber ``k``.

    Omega_k = 2 |sin(k d / 2)| / sqrt(L0 C0'), even and 2 pi / d periodic in k.
    """
    k = np.asarray(k, dtype=float)
    out = 2.0 * np.abs(np.sin(0.5 * k * cell.d)) / math.sqrt(_line_product(eff, cell))
    return out if out.ndim else float(out)


def gap_ratio(eff: EffectiveParams, cell: Cell) -> float:
    """The k-independent ratio 4 g_k^2 / (Omega_k omega0) that sets the gap size."""
    if eff.variant == "capacitive":
        ck = cell.ck
        return ck * ck / ((cell.c0 + ck) * (cell.cr + ck))
    return eff.x0p * eff.xrp / (eff.xkp * eff.xkp)


def coupling_g(k, eff: EffectiveParams, cell: Cell):
    """Photon-resonator coupling rate g_k (rad/s)."""
    omega_k = np.asarray(bare_dispersion(k, eff, cell))
    out = 0.5 * math.sqrt(gap_ratio(eff, cell)) * np.sqrt(eff.omega0 * omega_k)
    return out if out.ndim else float(out)


def resonator_port_params(cell: CapacitiveCell, spec: WaveguideSpec) -> tuple[float, float]:
    """Resonance frequency and external coupling rate of a single resonator on the line.

    Returns ``(omega0, gamma_e)`` with omega0 = 1/sqrt(Lr (Cr + Ck)) and
    gamma_e = Z0 / (2 Lr) * (Ck / (Cr + Ck))**2.
    """
    ctot = cell.cr + cell.ck
    omega0 = 1.0 / math.sqrt(cell.lr * ctot)
    gamma_e = spec.z0 / (2.0 * cell.lr) * (cell.ck / ctot) ** 2
    return omega0, gamma_e


def cell_from_spec(spec: WaveguideSpec) -> tuple[float, float]:
    """Per-period line inductance and capacitance ``(l0, c0)`` of an unloaded line."""
    l0 = spec.z0 * spec.n * spec.d / C_LIGHT
    c0 = spec.n * spec.d / (spec.z0 * C_LIGHT)
    return l0, c0


def loaded_line(cell: CapacitiveCell) -> WaveguideSpec:
    """Line spec including the quasi-static capacitive loading of the resonator branch.

    Far below resonance the branch Ck -- (Lr || Cr) adds Ck Cr / (Ck + Cr) of shunt
    capacitance, giving C0' per period.  Feeding this spec (and the matching
    ``gamma_e``) to :func:`metawg.bands.circuit_dispersion` reproduces the exact
    cascade dispersion.
    """
    eff = derive_effective(cell)
    z0 = math.sqrt(cell.l0 / eff.x0p)
    n = C_LIGHT * math.sqrt(cell.l0 * eff.x0p) / cell.d
    return WaveguideSpec(z0=z0, n=n, d=cell.d)


def continuum_gap(gamma_e: float, omega0: float, spec: WaveguideSpec) -> float:
    """First-order gap width (c / n d) (gamma_e / omega0) of the continuum model.

    Only accurate for small gap-to-midgap ratios.
    """
    return C_LIGHT / (spec.n * spec.d) * gamma_e / omega0
