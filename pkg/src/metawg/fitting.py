"""Least-squares fits of transmission traces.

* :func:`fit_fano` fits one resonance to S21 = 1 - ge e^{i phi0} / (gi + ge + 2i (w - w0))
  using the complex residual.
* :func:`fit_lumped_model` fits the finite-cascade forward model to |S21| in dB.

Both use scipy's Levenberg-Marquardt (MINPACK) with finite-difference
Jacobians.  Positive quantities are fitted in log space so they stay positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .circuit import CapacitiveCell, derive_effective
from .bands import band_edges
from .errors import DomainError, FitError
from .network import FiniteWaveguide, SParamTrace, simulate_s21

__all__ = [
    "FanoFit",
    "LumpedFit",
    "fano_model",
    "fit_fano",
    "fit_lumped_model",
    "lumped_model_s21",
    "MAX_ITERATIONS",
]

MAX_ITERATIONS = 200
_DB_FLOOR = -300.0


def _wrap_phase(phi: float) -> float:
    """Map an angle onto (-pi, pi]."""
    out = math.remainder(phi, 2.0 * math.pi)
    return math.pi if out == -math.pi else out


@dataclass(frozen=True)
class FanoFit:
    omega0: float
    gamma_i: float
    gamma_e: float
    phi0: float
    residual: float = 0.0

    def __post_init__(self):
        if not (self.gamma_i > 0 and self.gamma_e > 0):
            raise DomainError("gamma_i and gamma_e must be positive")
        if not (-math.pi < self.phi0 <= math.pi):
            raise DomainError("phi0 must lie in (-pi, pi]")

    @property
    def q_i(self) -> float:
        return self.omega0 / self.gamma_i

    @property
    def q_e(self) -> float:
        return self.omega0 / self.gamma_e

    def as_dict(self) -> dict:
        return {
            "omega0": self.omega0, "gamma_i": self.gamma_i, "gamma_e": self.gamma_e, "phi0": self.phi0,
            "f0_ghz": self.omega0 / (2e9 * math.pi), "q_i": self.q_i, "q_e": self.q_e, "residual": self.residual,
        }


def fano_model(omega, omega0: float, gamma_i: float, gamma_e: float, phi0: float):
    """S21 of a single resonance with an asymmetry phase ``phi0``."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 - gamma_e * np.exp(1j * phi0) / (gamma_i + gamma_e + 2j * (omega - omega0))


def _fano_guess(omega: np.ndarray, s21: np.ndarray) -> FanoFit:
    dip = np.abs(1.0 - s21)
    i0 = int(np.argmax(dip))
    omega0 = omega[i0]
    depth = float(np.clip(dip[i0], 1e-6, 0.999))
    half = dip**2 >= 0.5 * dip[i0] ** 2
    # contiguous half-power region around the peak
    lo = i0
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = i0
    while hi < omega.size - 1 and half[hi + 1]:
        hi += 1
    width = max(omega[hi] - omega[lo], omega[1] - omega[0] if omega.size > 1 else omega0 * 1e-6)
    gamma_e = depth * width
    gamma_i = max(width - gamma_e, 1e-3 * width)
    phi0 = _wrap_phase(float(np.angle(1.0 - s21[i0])))
    return FanoFit(float(omega0), float(gamma_i), float(gamma_e), phi0)


def fit_fano(trace: SParamTrace, window: tuple[float, float] | None = None, init: FanoFit | None = None,
             max_iterations: int = MAX_ITERATIONS) -> FanoFit:
    """Fit a single resonance inside ``window`` (Hz) of ``trace``.

    Raises :class:`FitError` (carrying the best parameters found) when the
    optimizer stops without converging.
    """
    if window is not None:
        trace = trace.window(*window)
    omega = trace.omega
    s21 = trace.s21
    if omega.size < 10:
        raise DomainError("the fit window needs at least 10 samples")
    guess = init if init is not None else _fano_guess(omega, s21)
    span = omega[-1] - omega[0]
    if span < 3.0 * (guess.gamma_i + guess.gamma_e):
        raise DomainError("the fit window must span at least three linewidths")
    w_scale = guess.gamma_i + guess.gamma_e

    def unpack(x):
        return guess.omega0 + x[0] * w_scale, math.exp(x[1]), math.exp(x[2]), x[3]

    def residual(x):
        diff = fano_model(omega, *unpack(x)) - s21
        return np.concatenate([diff.real, diff.imag])

    x0 = np.array([0.0, math.log(guess.gamma_i), math.log(guess.gamma_e), guess.phi0])
    sol = scipy.optimize.least_squares(residual, x0, method="lm", max_nfev=max_iterations * (x0.size + 1),
                                       xtol=1e-15, ftol=1e-15, gtol=1e-15)
    omega0, gamma_i, gamma_e, phi0 = unpack(sol.x)
    rms = float(np.sqrt(np.mean(np.abs(fano_model(omega, omega0, gamma_i, gamma_e, phi0) - s21) ** 2)))
    best = FanoFit(omega0, gamma_i, gamma_e, _wrap_phase(phi0), rms)
    if sol.status <= 0:
        raise FitError(f"Fano fit did not converge: {sol.message}", best=best,
                       info={"nfev": sol.nfev, "status": sol.status})
    return best


# ---------------------------------------------------------------------------
# lumped-element model


@dataclass(frozen=True)
class LumpedFit:
    cell: CapacitiveCell
    gamma_i: float
    scale: float = 1.0
    residual: float = 0.0

    def __post_init__(self):
        if not (0.5 < self.scale < 1.5):
            raise DomainError("scale must lie in (0.5, 1.5)")
        if not math.isfinite(self.residual):
            raise DomainError("residual must be finite")
        if self.gamma_i < 0:
            raise DomainError("gamma_i must be non-negative")

    def band_edges_hz(self) -> tuple[float, float]:
        edges = band_edges(derive_effective(self.cell), self.cell)
        k = self.scale / (2.0 * math.pi)
        return edges.omega_c_minus * k, edges.omega_c_plus * k

    def as_dict(self) -> dict:
        lo, hi = self.band_edges_hz()
        return {
            "c0": self.cell.c0, "l0": self.cell.l0, "cr": self.cell.cr, "lr": self.cell.lr, "ck": self.cell.ck,
            "d": self.cell.d, "gamma_i": self.gamma_i, "scale": self.scale, "residual": self.residual,
            "f_lower_ghz": lo / 1e9, "f_upper_ghz": hi / 1e9,
            "f_mid_ghz": 0.5 * (lo + hi) / 1e9, "span_ghz": (hi - lo) / 1e9,
        }


def lumped_model_s21(freq, cell: CapacitiveCell, gamma_i: float, scale: float, n_cells: int,
                     port_in: float = 50.0, port_out: float = 50.0) -> np.ndarray:
    """Cascade S21 with the model's frequency axis stretched by ``scale``: S(f) = S_sim(f / scale)."""
    wg = FiniteWaveguide.uniform(cell, n_cells, gamma_i=gamma_i, port_in=port_in, port_out=port_out)
    return simulate_s21(wg, np.asarray(freq, dtype=float) / scale).s21


def _db(s):
    return np.maximum(20.0 * np.log10(np.maximum(np.abs(s), 1e-300)), _DB_FLOOR)


def fit_lumped_model(trace: SParamTrace, init: LumpedFit, n_cells: int = 9, fit_scale: bool = False,
                     starts: int = 5, seed: int = 0, perturbation: float = 0.05,
                     port_in: float = 50.0, port_out: float = 50.0,
                     max_iterations: int = MAX_ITERATIONS) -> LumpedFit:
    """Fit Cr, Lr, Ck, gamma_i (and optionally the frequency scale) to |S21| in dB.

    With ``fit_scale`` the starting scale is the best point of a 0.0025-step
    grid over (0.52, 1.48) (plus ``init.scale``) at the initial elements.

    The line elements C0, L0 and the lattice constant are held at ``init.cell``.
    The first start is ``init`` itself; the remaining ``starts - 1`` are
    log-normal perturbations of it (relative size ``perturbation``) from a
    generator seeded with ``seed``.  The lowest-cost converged start wins.
    """
    freq = trace.freq
    target = _db(trace.s21)
    base = init.cell
    gamma_floor = 1.0  # rad/s; keeps log(gamma_i) finite for lossless starts

    x_ref = [math.log(base.cr), math.log(base.lr), math.log(base.ck), math.log(max(init.gamma_i, gamma_floor))]
    if fit_scale:
        # the dB landscape is rippled along the frequency axis; start from the
        # best scale on a coarse grid with the initial elements held fixed
        grid = np.append(np.linspace(0.52, 1.48, 385), init.scale)
        costs = [np.sum((_db(lumped_model_s21(freq, base, init.gamma_i, g, n_cells, port_in, port_out)) - target) ** 2)
                 for g in grid]
        x_ref.append(math.atanh(2.0 * (grid[int(np.nanargmin(costs))] - 1.0)))
    x_ref = np.array(x_ref)

    # parameters are offsets from x_ref; the small x_scale keeps the first
    # Levenberg-Marquardt step within a few percent
    def unpack(x):
        y = x_ref + x
        cell = base.replace(cr=math.exp(y[0]), lr=math.exp(y[1]), ck=math.exp(y[2]))
        gamma_i = math.exp(y[3])
        scale = 1.0 + 0.5 * math.tanh(y[4]) if fit_scale else init.scale
        return cell, gamma_i, scale

    def residual(x):
        try:
            cell, gamma_i, scale = unpack(x)
        except (DomainError, OverflowError):
            return np.full(freq.size, 1e3)
        return _db(lumped_model_s21(freq, cell, gamma_i, scale, n_cells, port_in, port_out)) - target

    rng = np.random.default_rng(seed)
    candidates = [np.zeros(x_ref.size)]
    for _ in range(max(starts, 1) - 1):
        jitter = rng.normal(0.0, perturbation, size=x_ref.size)
        jitter[3] *= 10.0  # the loss rate is poorly constrained; explore it more widely
        candidates.append(jitter)

    best = None
    best_failed = None
    for x0 in candidates:
        sol = scipy.optimize.least_squares(residual, x0, method="lm", max_nfev=max_iterations * (x0.size + 1),
                                           x_scale=1e-3)
        rms = float(np.sqrt(np.mean(sol.fun**2)))
        if not math.isfinite(rms):
            continue
        if sol.status > 0:
            if best is None or rms < best[0]:
                best = (rms, sol.x)
        elif best_failed is None or rms < best_failed[0]:
            best_failed = (rms, sol.x)
    if best is None:
        diag = None
        if best_failed is not None:
            cell, gamma_i, scale = unpack(best_failed[1])
            diag = LumpedFit(cell, gamma_i, scale, best_failed[0])
        raise FitError("lumped-model fit did not converge from any start", best=diag,
                       info={"starts": len(candidates)})
    cell, gamma_i, scale = unpack(best[1])
    return LumpedFit(cell, gamma_i, scale, best[0])
