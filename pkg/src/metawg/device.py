"""Reference device: a 50-ohm line (n = 2.54, d = 350 um) loaded for a 4.92-6.74 GHz gap.

The two band edges fix two of the three resonator elements; the remaining
freedom is the resonator-to-line capacitance ratio ``cr / c0`` (default 1).
"""
from __future__ import annotations

import math

from .circuit import CapacitiveCell, WaveguideSpec, cell_from_spec, derive_effective
from .errors import InvalidParameterError

__all__ = [
    "REFERENCE_LINE",
    "REFERENCE_EDGES_GHZ",
    "REFERENCE_QI",
    "cell_for_edges",
    "reference_cell",
]

REFERENCE_LINE = WaveguideSpec(z0=50.0, n=2.54, d=350e-6)
REFERENCE_EDGES_GHZ = (4.92, 6.74)
REFERENCE_QI = 7.2e4


def cell_for_edges(spec: WaveguideSpec, f_lower: float, f_upper: float, cr_ratio: float = 1.0) -> CapacitiveCell:
    """Capacitive cell on ``spec`` whose band gap spans ``[f_lower, f_upper]`` (Hz).

    With Cr = cr_ratio * C0 the gap ratio Ck^2 / ((C0 + Ck)(Cr + Ck)) =
    1 - (f_lower / f_upper)^2 is solved for Ck, then Lr places the upper edge.
    """
    if not (0 < f_lower < f_upper):
        raise InvalidParameterError("need 0 < f_lower < f_upper")
    if cr_ratio <= 0:
        raise InvalidParameterError("cr_ratio must be positive")
    l0, c0 = cell_from_spec(spec)
    cr = cr_ratio * c0
    ratio = 1.0 - (f_lower / f_upper) ** 2
    # Ck^2 (1 - ratio) - ratio (C0 + Cr) Ck - ratio C0 Cr = 0
    a = 1.0 - ratio
    b = -ratio * (c0 + cr)
    c = -ratio * c0 * cr
    ck = (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    cell = CapacitiveCell(c0=c0, l0=l0, cr=cr, lr=1.0, ck=ck, d=spec.d)
    eff = derive_effective(cell)
    omega_upper = 2.0 * math.pi * f_upper
    lr = 1.0 / (omega_upper**2 * eff.xrp)
    return cell.replace(lr=lr)


def reference_cell(cr_ratio: float = 1.0) -> CapacitiveCell:
    """Cell reproducing the reference 4.92 / 6.74 GHz band edges."""
    lo, hi = REFERENCE_EDGES_GHZ
    return cell_for_edges(REFERENCE_LINE, lo * 1e9, hi * 1e9, cr_ratio)
