"""Localization lengths from disorder and loss.

Disorder enters only through the resonator frequencies: cell n carries
``omega0_n = omega0 (1 + eps_n)`` with ``eps_n ~ Normal(0, sigma_rel)``,
realized by scaling the resonator inductance, ``Lr_n = Lr / (1 + eps_n)^2``.

Monte Carlo estimator
---------------------
Each realization is a disordered segment of ``n_cells`` cells embedded in the
clean periodic structure.  A vector starting on the clean Bloch mode that grows
under the cell transfer matrix is propagated through the segment, renormalized
every ``RENORM_EVERY`` cells, and finally projected back onto the same Bloch
mode with the matching left eigenvector.  The accumulated log-growth divided by
the segment length is the realization's inverse localization length; it equals
``-ln|t| / (N d)`` for the segment between clean leads, is exactly zero for a
clean transmission band and exactly ``Im k`` for a clean stop band.  Random
numbers come from independent streams keyed by ``(seed, block index)`` so the
result does not depend on thread scheduling.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .bands import BandEdges, dispersion_context, inverse_dispersion
from .circuit import CapacitiveCell, WaveguideSpec
from .errors import DomainError, InvalidParameterError
from .network import _abcd_elements

__all__ = [
    "LOC_PREFACTOR",
    "RENORM_EVERY",
    "BLOCK_SIZE",
    "DisorderConfig",
    "LocalizationProfile",
    "sigma_eff",
    "analytic_loc_length",
    "loss_loc_length",
    "combine_loc",
    "lyapunov_samples",
    "monte_carlo_localization",
    "default_frequency_grid",
]

LOC_PREFACTOR = 2.0 * gamma_fn(1.0 / 6.0) / (6.0 ** (1.0 / 3.0) * math.sqrt(math.pi))
RENORM_EVERY = 8
BLOCK_SIZE = 1024
# below this inverse length (per cell) the estimate is reported as a divergence
_ZERO_RATE_PER_CELL = 1e-9


@dataclass(frozen=True)
class DisorderConfig:
    n_cells: int = 100
    n_realizations: int = 100_000
    sigma_rel: float = 0.005
    seed: int = 0
    distribution: str = "normal"

    def __post_init__(self):
        if self.n_cells <= 0 or self.n_realizations <= 0:
            raise InvalidParameterError("n_cells and n_realizations must be positive")
        if not (0.0 <= self.sigma_rel < 0.1):
            raise InvalidParameterError("sigma_rel must lie in [0, 0.1)")
        if self.distribution != "normal":
            raise InvalidParameterError(f"unsupported distribution {self.distribution!r}")
        if not (0 <= self.seed < 2**64):
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")


@dataclass
class LocalizationProfile:
    """Localization lengths in units of cells (``inf`` marks a divergence)."""

    freq: np.ndarray
    ell_disorder: np.ndarray
    ell_loss: np.ndarray
    ell_total: np.ndarray
    stderr: np.ndarray
    stderr_disorder: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    CSV_HEADER = ("freq_ghz", "ell_disorder_cells", "ell_loss_cells", "ell_total_cells", "stderr")

    def to_csv(self, manifest_line: str | None = None) -> str:
        buf = io.StringIO()
        if manifest_line:
            buf.write(f"# manifest: {manifest_line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for row in zip(self.freq / (2e9 * math.pi), self.ell_disorder, self.ell_loss, self.ell_total, self.stderr):
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def sigma_eff(edge: str, gamma_e: float, gamma_i: float, delta: float, sigma_rel: float, omega0: float) -> float:
    """Dimensionless disorder strength of the equivalent band-edge model.

    ``low``:  sigma^2 = (gamma_e / gamma_i)^4 (d omega0 / Delta)^2
    ``high``: sigma^2 = (gamma_e / Delta)^4 (d omega0 / Delta)^2
    with d omega0 = sigma_rel * omega0.  ``inf`` for the low edge without loss.
    """
    if gamma_e <= 0 or delta <= 0 or omega0 <= 0 or gamma_i < 0 or sigma_rel < 0:
        raise DomainError("rates must be positive")
    spread = sigma_rel * omega0 / delta
    if edge == "high":
        return (gamma_e / delta) ** 2 * spread
    if edge == "low":
        if gamma_i == 0:
            return math.inf if spread > 0 else 0.0
        return (gamma_e / gamma_i) ** 2 * spread
    raise ValueError(f"edge must be 'low' or 'high', got {edge!r}")


def analytic_loc_length(sigma, d: float):
    """Band-edge law ell = 2 Gamma(1/6) / (6^(1/3) sqrt(pi)) * sigma^(-2/3) * d."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise DomainError("sigma must be non-negative")
    with np.errstate(divide="ignore"):
        out = LOC_PREFACTOR * d * sigma ** (-2.0 / 3.0)
    return float(out) if out.ndim == 0 else out


def _context(ctx) -> tuple[BandEdges, WaveguideSpec]:
    if isinstance(ctx, CapacitiveCell):
        return dispersion_context(ctx)
    edges, spec = ctx
    return edges, spec


def loss_loc_length(omega, ctx, gamma_i: float):
    """Loss-limited localization length 1 / Im k (m); ``ctx`` is a cell or (edges, line)."""
    edges, spec = _context(ctx)
    k = inverse_dispersion(omega, edges, spec, gamma_i)
    with np.errstate(divide="ignore"):
        out = 1.0 / np.asarray(k.im, dtype=float)
    out = np.where(np.asarray(k.im) <= 0, np.inf, out)
    return float(out) if out.ndim == 0 else out


def combine_loc(ell_d, ell_l):
    """Harmonic combination 1/ell = 1/ell_d + 1/ell_l (``inf`` means no contribution)."""
    ell_d = np.asarray(ell_d, dtype=float)
    ell_l = np.asarray(ell_l, dtype=float)
    if np.any(ell_d <= 0) or np.any(ell_l <= 0):
        raise DomainError("localization lengths must be positive")
    with np.errstate(divide="ignore"):
        inv = 1.0 / ell_d + 1.0 / ell_l
        out = 1.0 / inv
    out = np.minimum(out, np.minimum(ell_d, ell_l))
    return float(out) if out.ndim == 0 else out


def _bloch_vectors(omega: np.ndarray, cell: CapacitiveCell, gamma_i: float):
    """Growing right eigenvector and matching left eigenvector of the clean cell matrix."""
    a, b, c = _abcd_elements(omega, cell.c0, cell.l0, cell.cr, cell.lr, cell.ck, gamma_i)
    # eigenvalues of [[a, b], [c, a]]: a +- sqrt(b c)
    root = np.sqrt(b * c)
    lam_p, lam_m = a + root, a - root
    grow = np.abs(lam_p) >= np.abs(lam_m)
    sign = np.where(grow, 1.0, -1.0)
    # right eigenvector (b, s root) for eigenvalue a + s root; left (c, s root)
    v = np.stack([b, sign * root])
    w = np.stack([c, sign * root])
    with np.errstate(divide="ignore", invalid="ignore"):
        v = v / np.sqrt(np.abs(v[0]) ** 2 + np.abs(v[1]) ** 2)
        w = w / (w[0] * v[0] + w[1] * v[1])
    # exactly at a band edge the two Bloch modes merge (Jordan block); use the
    # single eigenvector and project onto itself
    degenerate = ~(np.isfinite(w).all(axis=0) & np.isfinite(v).all(axis=0))
    degenerate |= np.abs(root) <= 1e-12 * np.maximum(np.abs(a), 1.0)
    if np.any(degenerate):
        edge_v = np.where(np.abs(c) <= np.abs(b), np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
        v = np.where(degenerate, edge_v, v)
        w = np.where(degenerate, edge_v, w)
    return v, w


def lyapunov_samples(cell: CapacitiveCell, omega: np.ndarray, eps: np.ndarray, gamma_i: float = 0.0) -> np.ndarray:
    """Per-realization inverse localization lengths (per cell) for given disorder draws.

    ``omega`` has shape (F,), ``eps`` shape (R, N); the result has shape (F, R).
    """
    omega = np.asarray(omega, dtype=float)
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    n_real, n_cells = eps.shape
    v0, w = _bloch_vectors(omega, cell, gamma_i)
    w_col = omega[:, None]
    vec0 = np.broadcast_to(v0[:, :, None], (2, omega.size, n_real)).copy()
    x, y = vec0[0], vec0[1]
    log_acc = np.zeros((omega.size, n_real))
    lr_all = cell.lr / (1.0 + eps) ** 2
    for n in range(n_cells):
        a, b, c = _abcd_elements(w_col, cell.c0, cell.l0, cell.cr, lr_all[None, :, n], cell.ck, gamma_i)
        x, y = a * x + b * y, c * x + a * y
        if (n + 1) % RENORM_EVERY == 0 or n + 1 == n_cells:
            norm = np.sqrt(x.real**2 + x.imag**2 + y.real**2 + y.imag**2)
            log_acc += np.log(norm)
            x = x / norm
            y = y / norm
    proj = w[0][:, None] * x + w[1][:, None] * y
    with np.errstate(divide="ignore"):
        log_acc += np.log(np.abs(proj))
    return log_acc / n_cells


def _block_draws(seed: int, block: int, size: int, n_cells: int, sigma_rel: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))
    return sigma_rel * rng.standard_normal((size, n_cells))


def _mc_sums(cell, config: DisorderConfig, omega, gamma_i, threads: int):
    blocks = []
    remaining = config.n_realizations
    index = 0
    while remaining > 0:
        size = min(BLOCK_SIZE, remaining)
        blocks.append((index, size))
        remaining -= size
        index += 1

    def run(block):
        index, size = block
        eps = _block_draws(config.seed, index, size, config.n_cells, config.sigma_rel)
        clean = lyapunov_samples(cell, omega, eps, 0.0)
        lossy = lyapunov_samples(cell, omega, eps, gamma_i) if gamma_i > 0 else clean
        return (clean.sum(axis=1), (clean**2).sum(axis=1), lossy.sum(axis=1), (lossy**2).sum(axis=1))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    # reduce in block order so the result is independent of scheduling
    totals = [np.zeros(omega.size) for _ in range(4)]
    for part in parts:
        for acc, value in zip(totals, part):
            acc += value
    return totals


def _mean_and_err(total, total_sq, count):
    mean = total / count
    if count > 1:
        var = np.clip(total_sq / count - mean**2, 0.0, None) * count / (count - 1)
        err = np.sqrt(var / count)
    else:
        err = np.full_like(mean, np.inf)
    return mean, err


def _rate_to_length(rate):
    with np.errstate(divide="ignore"):
        ell = 1.0 / rate
    return np.where(rate <= _ZERO_RATE_PER_CELL, np.inf, ell)


def default_frequency_grid(edges: BandEdges, points: int = 400) -> np.ndarray:
    """Uniform grid over [omega_c- - Delta/2, omega_c+ + Delta/2] (rad/s)."""
    return np.linspace(edges.omega_c_minus - 0.5 * edges.delta, edges.omega_c_plus + 0.5 * edges.delta, points)


def monte_carlo_localization(cell: CapacitiveCell, config: DisorderConfig, freqs: Sequence[float],
                             gamma_i: float = 0.0, threads: int = 1) -> LocalizationProfile:
    """Monte Carlo localization profile over angular frequencies ``freqs``.

    ``ell_disorder`` comes from the loss-free run, ``ell_total`` from the run with
    both disorder and loss (same random draws), ``ell_loss`` from the clean
    complex band structure.  ``stderr`` is the standard error of 1/ell_total in
    inverse cells.
    """
    omega = np.asarray(freqs, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("frequencies must be positive")
    if gamma_i < 0:
        raise DomainError("gamma_i must be non-negative")
    s_clean, sq_clean, s_lossy, sq_lossy = _mc_sums(cell, config, omega, gamma_i, threads)
    rate_d, err_d = _mean_and_err(s_clean, sq_clean, config.n_realizations)
    rate_t, err_t = _mean_and_err(s_lossy, sq_lossy, config.n_realizations)
    if gamma_i > 0:
        ell_loss = np.asarray(loss_loc_length(omega, cell, gamma_i)) / cell.d
    else:
        ell_loss = np.full(omega.shape, np.inf)
    return LocalizationProfile(
        freq=omega,
        ell_disorder=_rate_to_length(rate_d),
        ell_loss=ell_loss,
        ell_total=_rate_to_length(rate_t),
        stderr=err_t,
        stderr_disorder=err_d,
        meta={"n_cells": config.n_cells, "n_realizations": config.n_realizations,
              "sigma_rel": config.sigma_rel, "seed": config.seed, "gamma_i": gamma_i},
    )
