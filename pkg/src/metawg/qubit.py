"""Transmon qubit coupled through a capacitor to the loaded waveguide.

The qubit is linearized as L_J || C_q and couples through C_g to the line port
impedance ``Z_line``.  Everything follows from the load admittance
``Y_L = i w C_g / (1 + i w C_g Z_line)``:

* Lamb shift      dw = -(w^2 L_J / 2) Im Y_L(w)
* Purcell rate    kappa = w^2 L_J Re Y_L(w)       (energy decay rate)
* exact poles     zeros of Y_L(w) + i w C_q + 1/(i w L_J)

Complex frequencies returned by :func:`strong_coupling_poles` use the
``exp(-i w t)`` convention: the real part is the dressed frequency and
``-2 Im`` is the decay rate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np
import scipy.optimize
import scipy.signal

from .bands import BandEdges, dispersion_context, group_index, inverse_dispersion
from .circuit import CapacitiveCell
from .constants import C_LIGHT, HBAR, PHI0, PLANCK
from .errors import DomainError, InvalidParameterError
from .network import FiniteWaveguide, _abcd_elements, bloch_phase, input_impedance

__all__ = [
    "TransmonParams",
    "QubitEnvironment",
    "CascadeEnvironment",
    "BlochEnvironment",
    "ImpedanceEnvironment",
    "BlochImpedance",
    "LambShift",
    "PurcellResult",
    "QubitPrediction",
    "transmon_frequency",
    "josephson_energy",
    "linearized_qubit",
    "dressed_frequency",
    "calibrate_cq",
    "transmon_from_frequency",
    "bloch_line_impedance",
    "load_admittance",
    "lamb_shift",
    "purcell_decay",
    "markov_decay_in_band",
    "calibrate_markov_coupling",
    "strong_coupling_poles",
    "lifetime_slope_identity",
    "two_transition_rates",
    "calibrate_cg",
    "predict",
]

_REDUCED_PHI0 = PHI0 / (2.0 * math.pi)


@dataclass(frozen=True)
class TransmonParams:
    """Transmon energies (J), shunt and coupling capacitances (F), flux in units of Phi0."""

    ej_max: float
    ec: float
    cq: float
    cg: float
    flux: float = 0.0
    min_ratio: float = 20.0

    def __post_init__(self):
        if not (self.ej_max > 0 and self.ec > 0):
            raise DomainError("ej_max and ec must be positive")
        if not (self.cq > 0 and self.cg > 0):
            raise DomainError("cq and cg must be positive")
        if self.ej_max / self.ec < self.min_ratio:
            raise InvalidParameterError(
                f"E_J/E_C = {self.ej_max / self.ec:.3g} below transmon guard {self.min_ratio}")

    def with_(self, **changes) -> "TransmonParams":
        return replace(self, **changes)

    def tuned_to(self, omega_q: float) -> "TransmonParams":
        """Copy at zero flux whose linearized frequency 1/sqrt(L_J C_q) equals ``omega_q``."""
        ej = _REDUCED_PHI0**2 * omega_q**2 * self.cq
        return replace(self, ej_max=ej, flux=0.0, min_ratio=min(self.min_ratio, 0.5 * ej / self.ec))

    def dressed_to(self, omega_q: float) -> "TransmonParams":
        """Copy at zero flux whose capacitively dressed frequency 1/sqrt(L_J (C_q + C_g)) equals ``omega_q``."""
        return self.tuned_to(omega_q * math.sqrt(1.0 + self.cg / self.cq))


def josephson_energy(p: TransmonParams) -> float:
    """E_J(flux) = E_J,max cos(2 pi flux)."""
    return p.ej_max * math.cos(2.0 * math.pi * p.flux)


def transmon_frequency(p: TransmonParams) -> float:
    """Angular g-e frequency (sqrt(8 E_C E_J) - E_C) / hbar."""
    ej = josephson_energy(p)
    if ej <= 0:
        raise DomainError(f"non-positive E_J at flux {p.flux}")
    return (math.sqrt(8.0 * p.ec * ej) - p.ec) / HBAR


def linearized_qubit(p: TransmonParams) -> tuple[float, float]:
    """``(L_J, omega_q)`` with L_J = (Phi0 / 2 pi)^2 / E_J and omega_q = 1 / sqrt(L_J C_q)."""
    ej = josephson_energy(p)
    if ej <= 0:
        raise DomainError(f"non-positive E_J at flux {p.flux}")
    l_j = _REDUCED_PHI0**2 / ej
    return l_j, 1.0 / math.sqrt(l_j * p.cq)


def dressed_frequency(p: TransmonParams) -> float:
    """1/sqrt(L_J (C_q + C_g)): the exact mode of the qubit when the line port is shorted.

    Perturbative observables evaluated here (with the anomalous part of Y_L as
    the perturbation) are the weak-coupling limit of the exact poles.
    """
    l_j, _ = linearized_qubit(p)
    return 1.0 / math.sqrt(l_j * (p.cq + p.cg))


def calibrate_cq(p: TransmonParams) -> TransmonParams:
    """Choose C_q so the linearized frequency equals the transmon frequency at zero flux."""
    p0 = replace(p, flux=0.0)
    omega = transmon_frequency(p0)
    l_j, _ = linearized_qubit(p0)
    return replace(p, cq=1.0 / (omega**2 * l_j))


def transmon_from_frequency(f_ge: float, ratio: float, cg: float) -> TransmonParams:
    """Transmon with zero-flux g-e frequency ``f_ge`` (Hz) and E_J/E_C = ``ratio``; C_q calibrated."""
    ec = PLANCK * f_ge / (math.sqrt(8.0 * ratio) - 1.0)
    p = TransmonParams(ej_max=ratio * ec, ec=ec, cq=1e-13, cg=cg)
    return calibrate_cq(p)


# ---------------------------------------------------------------------------
# environments


class QubitEnvironment(Protocol):
    r_load: float

    @property
    def x(self) -> float: ...

    def z_line(self, omega): ...


@dataclass(frozen=True)
class CascadeEnvironment:
    """Finite cascade seen from the qubit port, far end terminated by ``r_load``."""

    waveguide: FiniteWaveguide
    r_load: float = 50.0

    def __post_init__(self):
        if not self.r_load > 0:
            raise DomainError("r_load must be positive")

    @property
    def x(self) -> float:
        return self.waveguide.length

    @property
    def cell(self) -> CapacitiveCell:
        return self.waveguide.cells[0]

    @property
    def gamma_i(self) -> float:
        return self.waveguide.gamma_i

    def z_line(self, omega):
        return input_impedance(self.waveguide, omega, self.r_load)


@dataclass(frozen=True)
class BlochEnvironment:
    """Periodic structure of ``n_cells`` identical cells described by its Bloch impedance."""

    cell: CapacitiveCell
    n_cells: int
    gamma_i: float = 0.0
    r_load: float = 50.0

    @property
    def x(self) -> float:
        return self.n_cells * self.cell.d

    def z_line(self, omega):
        return bloch_line_impedance(omega, self.cell, self.r_load, self.x, self.gamma_i).z_line


@dataclass(frozen=True)
class ImpedanceEnvironment:
    """Arbitrary port impedance ``z_func(omega)`` (e.g. a short or a matched resistor)."""

    z_func: Callable
    r_load: float = 50.0
    length: float = 0.0

    @property
    def x(self) -> float:
        return self.length

    def z_line(self, omega):
        return self.z_func(omega)


@dataclass(frozen=True)
class BlochImpedance:
    z_line: complex
    z_approx: complex
    z_bloch: complex
    valid: bool


def bloch_line_impedance(omega, cell: CapacitiveCell, r_load: float, x: float, gamma_i: float = 0.0) -> BlochImpedance:
    """Port impedance of a periodic line of length ``x`` terminated by ``r_load``.

    ``z_line`` is the transmission-line form Z_B (R + Z_B tanh(g x)) / (Z_B + R tanh(g x))
    with g = i k; it is exact for whole numbers of symmetric cells.  ``z_approx`` is
    the deep-gap form Z_B + 4 R exp(-2 Im(k) x), flagged ``valid`` only inside the
    gap with Im(k) x > 2 and R < |Z_B| / 10.
    """
    omega = np.asarray(omega)
    _, b, _ = _abcd_elements(omega, cell.c0, cell.l0, cell.cr, cell.lr, cell.ck, gamma_i)
    kd = bloch_phase(omega, cell, gamma_i)
    theta = 1j * np.conj(kd)  # propagation constant per cell, Re >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z_b = b / np.sinh(theta)
        t = np.tanh(theta * x / cell.d)
        z_line = z_b * (r_load + z_b * t) / (z_b + r_load * t)
        im_k = np.imag(kd) / cell.d
        z_approx = z_b + 4.0 * r_load * np.exp(-2.0 * im_k * x)
    edges, _ = dispersion_context(cell)
    in_gap = (omega > edges.omega_c_minus) & (omega < edges.omega_c_plus)
    valid = in_gap & (im_k * x > 2.0) & (r_load < 0.1 * np.abs(z_b))
    if np.ndim(z_line) == 0:
        return BlochImpedance(complex(z_line), complex(z_approx), complex(z_b), bool(valid))
    return BlochImpedance(z_line, z_approx, z_b, valid)


# ---------------------------------------------------------------------------
# weak-coupling observables


def load_admittance(omega, p: TransmonParams, env: QubitEnvironment):
    """Y_L = i w C_g / (1 + i w C_g Z_line)."""
    z = env.z_line(omega)
    y_g = 1j * np.asarray(omega) * p.cg
    out = y_g / (1.0 + z * y_g)
    return complex(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LambShift:
    """Frequency shifts in rad/s.

    ``raw`` is the full shift, ``capacitive`` the part produced by C_g alone
    (Z_line = 0), ``anomalous = raw - capacitive``.  ``referenced`` is the
    anomalous shift minus that of a qubit (same C_q, C_g) sitting at a
    reference frequency, ``nan`` when no reference was requested.
    """

    raw: float
    capacitive: float
    anomalous: float
    referenced: float
    weak: bool


def _anomalous(omega_q: float, p: TransmonParams, env) -> tuple[float, float, float]:
    l_j, _ = linearized_qubit(p)
    y = load_admittance(omega_q, p, env)
    pref = -0.5 * omega_q**2 * l_j
    return pref * y.imag, pref * omega_q * p.cg, pref * (y - 1j * omega_q * p.cg).imag


def lamb_shift(omega_q: float, p: TransmonParams, env: QubitEnvironment, edges: BandEdges | None = None,
               reference: float | None = None) -> LambShift:
    """Qubit frequency shift -(w^2 L_J / 2) Im Y_L and its decomposition.

    ``weak`` is False when |anomalous| exceeds 10% of the detuning from the
    nearest band edge (checked only if ``edges`` is given).  ``reference`` is an
    angular frequency (typically mid-gap) for the referenced shift.
    """
    raw, capacitive, anomalous = _anomalous(omega_q, p, env)
    referenced = math.nan
    if reference is not None:
        referenced = anomalous - _anomalous(reference, p.tuned_to(reference), env)[2]
    weak = True
    if edges is not None:
        detuning = min(abs(omega_q - edges.omega_c_minus), abs(omega_q - edges.omega_c_plus))
        weak = abs(anomalous) < 0.1 * detuning
    return LambShift(raw, capacitive, anomalous, referenced, weak)


@dataclass(frozen=True)
class PurcellResult:
    kappa: float
    t_rad: float
    t_rad_closed: float


def _im_k(omega, env) -> float:
    cell = getattr(env, "cell", None)
    if cell is None:
        raise InvalidParameterError("environment has no periodic structure for the closed form")
    edges, line = dispersion_context(cell)
    return float(inverse_dispersion(omega, edges, line, getattr(env, "gamma_i", 0.0)).im)


def radiative_lifetime_closed(omega_q, p: TransmonParams, env, im_k: float | None = None) -> float:
    """Deep-gap lifetime C_q / (4 w^2 C_g^2 R_L) exp(2 x Im k)."""
    if im_k is None:
        im_k = _im_k(omega_q, env)
    return p.cq / (4.0 * omega_q**2 * p.cg**2 * env.r_load) * math.exp(2.0 * env.x * im_k)


def purcell_decay(omega_q: float, p: TransmonParams, env: QubitEnvironment) -> PurcellResult:
    """Radiative decay rate kappa = w^2 L_J Re Y_L and lifetime 1/kappa.

    ``t_rad_closed`` is the deep-gap closed form (``nan`` when the environment has
    no periodic structure).
    """
    l_j, _ = linearized_qubit(p)
    y = load_admittance(omega_q, p, env)
    kappa = omega_q**2 * l_j * y.real
    t_rad = 1.0 / kappa if kappa > 0 else math.inf
    try:
        closed = radiative_lifetime_closed(omega_q, p, env)
    except InvalidParameterError:
        closed = math.nan
    return PurcellResult(kappa, t_rad, closed)


def markov_decay_in_band(omega_q: float, f_coupling: float, length_l: float, n_g) -> float:
    """Markovian emission rate gamma = (L / c) f^2 n_g into a transmission band."""
    if length_l < 0:
        raise DomainError("length must be non-negative")
    return length_l / C_LIGHT * f_coupling**2 * np.real(n_g)


def calibrate_markov_coupling(omega_q: float, p: TransmonParams, env, length_l: float, n_g) -> float:
    """Coupling ``f`` making :func:`markov_decay_in_band` equal the admittance rate at ``omega_q``."""
    kappa = purcell_decay(omega_q, p.tuned_to(omega_q), env).kappa
    return math.sqrt(kappa * C_LIGHT / (length_l * np.real(n_g)))


# ---------------------------------------------------------------------------
# exact poles


def _total_admittance(omega, p: TransmonParams, env, l_j: float):
    return load_admittance(omega, p, env) + 1j * omega * p.cq + 1.0 / (1j * omega * l_j)


def strong_coupling_poles(p: TransmonParams, env, window: tuple[float, float], points: int = 4001,
                          rtol: float = 1e-10) -> list[complex]:
    """Complex zeros of Y_L + Y_q inside ``window`` (rad/s), in the exp(-i w t) convention.

    Seeds are the peaks of |1/Y| on a real grid; each is refined by complex secant
    iteration.  Returns an empty list if no root converges inside the window.
    """
    lo, hi = window
    if not (0 < lo < hi):
        raise DomainError("window must satisfy 0 < lo < hi")
    l_j, _ = linearized_qubit(p)
    grid = np.linspace(lo, hi, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.abs(1.0 / _total_admittance(grid, p, env, l_j))
    peaks, _ = scipy.signal.find_peaks(np.nan_to_num(inv, nan=0.0, posinf=np.finfo(float).max))
    step = grid[1] - grid[0]
    roots: list[complex] = []

    def f(w):
        return complex(_total_admittance(w, p, env, l_j))

    for i in peaks:
        w0 = complex(grid[i])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                # exp(+i w t) circuit convention: damped poles sit at Im w > 0
                root = scipy.optimize.newton(f, w0 + 1e-3j * step, x1=w0 + 0.5 * step + 1e-2j * step,
                                             tol=rtol * abs(w0), maxiter=200)
        except (RuntimeError, OverflowError, ZeroDivisionError):
            continue
        root = complex(root)
        if not (lo <= root.real <= hi) or abs(f(root)) > 1e-6 * abs(root * p.cq):
            continue
        if any(abs(root.conjugate() - r) <= 1e-7 * abs(root) for r in roots):
            continue
        roots.append(root.conjugate())
    roots.sort(key=lambda z: z.real)
    return roots


# ---------------------------------------------------------------------------
# band-edge identity and multi-level rates


def lifetime_slope_identity(omega: float, p: TransmonParams, env, step: float | None = None) -> tuple[float, float]:
    """``(lhs, rhs)`` = (|dT_rad/dw| / T_rad, x |Im n_g| / c), both in seconds.

    ``lhs`` is a centered finite difference (default step Delta / 10^4) of the
    closed-form lifetime using the lossy complex band structure of ``env``;
    ``rhs`` uses the analytic group index at the same loss.
    """
    cell = env.cell
    edges, line = dispersion_context(cell)
    gamma_i = env.gamma_i
    h = edges.delta * 1e-4 if step is None else step
    t_plus = radiative_lifetime_closed(omega + h, p, env)
    t_minus = radiative_lifetime_closed(omega - h, p, env)
    t0 = radiative_lifetime_closed(omega, p, env)
    lhs = abs(t_plus - t_minus) / (2.0 * h) / t0
    n_g = group_index(omega, edges, line, gamma_i)
    rhs = env.x * abs(n_g.imag) / C_LIGHT
    return lhs, rhs


def two_transition_rates(p: TransmonParams, env=None, rate: Callable[[float], float] | None = None) -> tuple[float, float]:
    """``(gamma_ge, gamma_fe)``: the f-e rate is twice the single-photon rate at w_fe = w_ge - E_C/hbar.

    The single-photon rate defaults to the admittance (Purcell) rate of a qubit
    tuned to each frequency in ``env``; pass ``rate`` to use another spectral model.
    """
    omega_ge = transmon_frequency(p)
    omega_fe = omega_ge - p.ec / HBAR
    if rate is None:
        if env is None:
            raise InvalidParameterError("need an environment or a rate function")

        def rate(w):
            return purcell_decay(w, p.tuned_to(w), env).kappa

    return rate(omega_ge), 2.0 * rate(omega_fe)


# ---------------------------------------------------------------------------
# calibration and sweeps


def calibrate_cg(p: TransmonParams, env, target: float = 2.0 * math.pi * 10e6,
                 probe_fraction: float = 0.05) -> tuple[TransmonParams, dict]:
    """Choose C_g so the mid-gap-referenced shift averages ``target`` in magnitude at the edges.

    The probes sit at w_c- + f Delta and w_c+ - f Delta (f = ``probe_fraction``).
    """
    edges, _ = dispersion_context(env.cell)
    probes = (edges.omega_c_minus + probe_fraction * edges.delta, edges.omega_c_plus - probe_fraction * edges.delta)
    mid = edges.omega_mid

    def shifts_for(q):
        return [lamb_shift(w, q.tuned_to(w), env, reference=mid).referenced for w in probes]

    def mismatch(log_cg):
        shifts = shifts_for(p.with_(cg=math.exp(log_cg)))
        return math.log(0.5 * (abs(shifts[0]) + abs(shifts[1])) / target)

    sol = scipy.optimize.brentq(mismatch, math.log(1e-18), math.log(1e-12), xtol=1e-12)
    q = p.with_(cg=math.exp(sol))
    info = {"cg": q.cg, "probe_omegas": probes, "reference_omega": mid,
            "referenced_shifts": shifts_for(q), "target": target}
    return q, info


@dataclass(frozen=True)
class QubitPrediction:
    omega_q_bare: float
    lamb_shift: float
    lamb_shift_anomalous: float
    lamb_shift_referenced: float
    kappa: float
    t_rad: float
    t1_total: float


def predict(p: TransmonParams, env, t_int: float = math.inf, reference: float | None = None) -> QubitPrediction:
    """Observables at the transmon's own frequency; 1/T1 = 1/T_rad + 1/T_int."""
    omega = transmon_frequency(p)
    shift = lamb_shift(omega, p, env, reference=reference)
    decay = purcell_decay(omega, p, env)
    kappa = max(decay.kappa, 0.0)
    inv_t1 = kappa + (1.0 / t_int if t_int > 0 else math.inf)
    t1 = 1.0 / inv_t1 if inv_t1 > 0 else math.inf
    return QubitPrediction(omega, shift.raw, shift.anomalous, shift.referenced, kappa, decay.t_rad, t1)
