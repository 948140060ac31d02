import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metawg.bands import group_index, inverse_dispersion
from metawg.constants import HBAR, PHI0, PLANCK
from metawg.errors import DomainError, InvalidParameterError
from metawg.network import FiniteWaveguide, image_impedance, input_impedance, mode_frequencies
from metawg.qubit import (
    BlochEnvironment,
    CascadeEnvironment,
    ImpedanceEnvironment,
    TransmonParams,
    bloch_line_impedance,
    calibrate_cg,
    calibrate_markov_coupling,
    dressed_frequency,
    lamb_shift,
    lifetime_slope_identity,
    linearized_qubit,
    load_admittance,
    markov_decay_in_band,
    predict,
    purcell_decay,
    strong_coupling_poles,
    transmon_frequency,
    transmon_from_frequency,
    two_transition_rates,
)

CG = 13.81e-15  # calibrated coupling capacitance of the reference device


@pytest.fixture(scope="module")
def qubit():
    return transmon_from_frequency(7.9e9, 100.0, CG)


@pytest.fixture(scope="module")
def env(cell, gamma_i):
    return CascadeEnvironment(FiniteWaveguide.uniform(cell, 9, gamma_i=gamma_i), 50.0)


def at(edges, frac):
    return edges.omega_c_minus + frac * edges.delta


# --- transmon ---------------------------------------------------------------------------

def test_transmon_frequency_ratio_100():
    ec = PLANCK * 1e8
    p = TransmonParams(ej_max=100 * ec, ec=ec, cq=1e-13, cg=1e-15)
    assert HBAR * transmon_frequency(p) / ec == pytest.approx(math.sqrt(800) - 1, rel=1e-14)
    assert HBAR * transmon_frequency(p) / ec == pytest.approx(27.28, abs=5e-3)


def test_reference_transmon(qubit):
    assert transmon_frequency(qubit) == pytest.approx(2 * math.pi * 7.9e9, rel=1e-12)
    assert qubit.ej_max / qubit.ec == pytest.approx(100.0, rel=1e-12)
    # calibrated C_q: linearized and transmon frequencies coincide at zero flux
    assert linearized_qubit(qubit)[1] == pytest.approx(transmon_frequency(qubit), rel=1e-12)
    assert qubit.ec / PLANCK == pytest.approx(290e6, rel=3e-3)


def test_sixth_flux_quantum_halves_ej(qubit):
    p = qubit.with_(flux=1 / 6)
    scaled = (HBAR * transmon_frequency(p) + p.ec) / (HBAR * transmon_frequency(qubit) + qubit.ec)
    assert scaled == pytest.approx(1 / math.sqrt(2), rel=1e-12)


@given(st.floats(0.0, 0.249), st.floats(0.0, 0.249))
def test_frequency_decreases_with_flux(a, b):
    p = transmon_from_frequency(7.9e9, 100.0, CG)
    lo, hi = sorted((a, b))
    assert transmon_frequency(p.with_(flux=hi)) <= transmon_frequency(p.with_(flux=lo)) * (1 + 1e-15)


def test_negative_ej_branch_rejected(qubit):
    with pytest.raises(DomainError):
        transmon_frequency(qubit.with_(flux=0.3))
    with pytest.raises(DomainError):
        linearized_qubit(qubit.with_(flux=0.26))


def test_parameter_guards():
    with pytest.raises(InvalidParameterError):
        TransmonParams(ej_max=10.0, ec=1.0, cq=1e-13, cg=1e-15)
    with pytest.raises(DomainError):
        TransmonParams(ej_max=100.0, ec=1.0, cq=1e-13, cg=0.0)
    TransmonParams(ej_max=10.0, ec=1.0, cq=1e-13, cg=1e-15, min_ratio=5.0)


def test_linearized_scaling(qubit):
    l1, w1 = linearized_qubit(qubit)
    l2, w2 = linearized_qubit(qubit.with_(ej_max=2 * qubit.ej_max))
    assert l2 == pytest.approx(l1 / 2, rel=1e-14)
    assert w2 == pytest.approx(w1 * math.sqrt(2), rel=1e-14)
    assert PHI0 == pytest.approx(2.0678e-15, rel=1e-4)
    p = TransmonParams(ej_max=PLANCK * 20e9, ec=PLANCK * 0.2e9, cq=1e-13, cg=1e-15)
    assert linearized_qubit(p)[0] == pytest.approx(8.2e-9, rel=5e-3)


# --- line impedance ---------------------------------------------------------------------

def test_bloch_form_equals_cascade(cell, edges, gamma_i):
    for frac in (0.1, 0.5, 0.9):
        w = at(edges, frac)
        b = bloch_line_impedance(w, cell, 50.0, 9 * cell.d, gamma_i)
        z = input_impedance(FiniteWaveguide.uniform(cell, 9, gamma_i=gamma_i), w, 50.0)
        assert b.z_line == pytest.approx(z, rel=1e-6)


def test_bloch_limits(cell, edges):
    w = edges.omega_mid
    far = bloch_line_impedance(w, cell, 50.0, 400 * cell.d)
    assert far.z_line == pytest.approx(far.z_bloch, rel=1e-12)
    inband = 0.5 * edges.omega_c_minus
    zb = bloch_line_impedance(inband, cell, 1.0, cell.d).z_bloch
    for n in (1, 4, 13):
        matched = bloch_line_impedance(inband, cell, zb.real, n * cell.d)
        assert matched.z_line == pytest.approx(zb, rel=1e-9)
        assert matched.valid is False


def test_deep_gap_approximation_flag(cell, edges):
    w = at(edges, 0.2)
    good = bloch_line_impedance(w, cell, 1.0, 18 * cell.d)
    assert good.valid
    assert good.z_approx.real == pytest.approx(good.z_line.real, rel=0.2)
    assert not bloch_line_impedance(w, cell, 50.0, 18 * cell.d).valid  # R_L comparable to |Z_B|
    assert not bloch_line_impedance(w, cell, 1.0, 2 * cell.d).valid  # too short


# --- load admittance, Lamb shift, Purcell ---------------------------------------------

def test_admittance_of_shorted_port(qubit):
    short = ImpedanceEnvironment(lambda w: 0.0 * w)
    w = 2 * math.pi * 6e9
    assert load_admittance(w, qubit, short) == pytest.approx(1j * w * qubit.cg, rel=1e-15)
    ls = lamb_shift(w, qubit, short)
    assert ls.raw == pytest.approx(-0.5 * w**2 * linearized_qubit(qubit)[0] * w * qubit.cg, rel=1e-14)
    assert ls.anomalous == pytest.approx(0.0, abs=1e-9 * abs(ls.raw))
    # for a qubit at its own linearized frequency the capacitive term is -C_g/(2 C_q) of it
    q = qubit.tuned_to(w)
    assert lamb_shift(w, q, short).capacitive / w == pytest.approx(-q.cg / (2 * q.cq), rel=1e-14)


def test_admittance_first_order_expansion(qubit):
    w = 2 * math.pi * 6e9
    z = 0.3 + 0.2j
    y = load_admittance(w, qubit, ImpedanceEnvironment(lambda _: z))
    first = 1j * w * qubit.cg + (w * qubit.cg) ** 2 * z
    assert abs(w * qubit.cg * z) < 1e-3
    assert abs(y - first) < 10 * abs(w * qubit.cg) ** 3 * abs(z) ** 2


def test_admittance_is_passive(cell, gamma_i, qubit):
    wg = FiniteWaveguide.uniform(cell, 9, gamma_i=gamma_i)
    omega = np.linspace(0.5e9, 40e9, 3001) * 2 * math.pi
    for r in (1.0, 50.0, 1e4):
        y = load_admittance(omega, qubit, CascadeEnvironment(wg, r))
        assert np.all(y.real >= -1e-12 * np.abs(y))


def test_admittance_decays_with_length(cell, edges, line, gamma_i, qubit):
    w = edges.omega_mid
    q = qubit.tuned_to(w)
    ns = np.arange(6, 15)
    re_y = [load_admittance(w, q, CascadeEnvironment(FiniteWaveguide.uniform(cell, int(n), gamma_i=gamma_i))).real
            for n in ns]
    slope = np.polyfit(ns * cell.d, np.log(re_y), 1)[0]
    assert slope == pytest.approx(-2 * inverse_dispersion(w, edges, line, gamma_i).im, rel=0.15)


def test_anomalous_shift_sign_structure(edges, env, qubit):
    lower = lamb_shift(at(edges, 0.05), qubit.tuned_to(at(edges, 0.05)), env, reference=edges.omega_mid)
    upper = lamb_shift(at(edges, 0.95), qubit.tuned_to(at(edges, 0.95)), env, reference=edges.omega_mid)
    # repelled from both band edges relative to the gap interior
    assert lower.referenced > 0 > upper.referenced


def test_weak_coupling_flag(edges, env, qubit):
    assert lamb_shift(edges.omega_mid, qubit.tuned_to(edges.omega_mid), env, edges).weak
    near = edges.omega_c_plus * (1 - 1e-5)
    assert not lamb_shift(near, qubit.tuned_to(near), env, edges).weak


def test_kappa_quadratic_in_cg(edges, env, qubit):
    w = edges.omega_mid
    small = qubit.with_(cg=1e-16).tuned_to(w)
    k1 = purcell_decay(w, small, env).kappa
    k2 = purcell_decay(w, small.with_(cg=small.cg / 2), env).kappa
    assert k2 / k1 == pytest.approx(0.25, rel=0.01)


def test_radiative_lifetime_exponential_law(cell, edges, line, gamma_i, qubit):
    w = edges.omega_mid
    q = qubit.tuned_to(w)
    xs, logs = [], []
    for n in (6, 9, 12, 15):
        env = CascadeEnvironment(FiniteWaveguide.uniform(cell, n, gamma_i=gamma_i))
        xs.append(n * cell.d)
        logs.append(math.log(purcell_decay(w, q, env).t_rad))
    slope = np.polyfit(xs, logs, 1)[0]
    assert slope == pytest.approx(2 * inverse_dispersion(w, edges, line, gamma_i).im, rel=0.05)


def test_closed_form_lifetime_deep_in_gap(cell, edges, line, qubit):
    # valid regime of the closed form: R_L << |Z_B| and Im(k) x >= 2
    env = CascadeEnvironment(FiniteWaveguide.uniform(cell, 18), 2.0)
    for frac in (0.1, 0.2, 0.35, 0.5, 0.65):
        w = at(edges, frac)
        assert inverse_dispersion(w, edges, line).im * env.x >= 2
        r = purcell_decay(w, qubit.tuned_to(w), env)
        assert r.t_rad == pytest.approx(r.t_rad_closed, rel=0.2)
        assert r.t_rad == pytest.approx(1 / r.kappa, rel=1e-15)


def test_lifetime_contrast(edges, env, qubit):
    mid = purcell_decay(edges.omega_mid, qubit.tuned_to(edges.omega_mid), env).t_rad
    band = edges.omega_c_plus + edges.delta / 50
    assert mid / purcell_decay(band, qubit.tuned_to(band), env).t_rad >= 10


def test_closed_form_needs_periodic_environment(qubit):
    r = purcell_decay(1e10, qubit, ImpedanceEnvironment(lambda w: 50.0 + 0j * w))
    assert math.isnan(r.t_rad_closed) and r.kappa > 0


def test_bloch_environment_matches_cascade(cell, edges, gamma_i, qubit, env):
    w = at(edges, 0.4)
    q = qubit.tuned_to(w)
    a = purcell_decay(w, q, BlochEnvironment(cell, 9, gamma_i, 50.0)).kappa
    assert a == pytest.approx(purcell_decay(w, q, env).kappa, rel=1e-6)


# --- Markovian in-band emission ---------------------------------------------------------------

def test_markov_rate_scalings():
    assert markov_decay_in_band(1e10, 0.0, 1e-2, 5.0) == 0.0
    a = markov_decay_in_band(1e10, 3e4, 1e-2, 5.0)
    assert markov_decay_in_band(1e10, 3e4, 1e-2, 10.0) == pytest.approx(2 * a, rel=1e-15)
    assert markov_decay_in_band(1e10, 6e4, 1e-2, 5.0) == pytest.approx(4 * a, rel=1e-15)
    with pytest.raises(DomainError):
        markov_decay_in_band(1e10, 1.0, -1.0, 1.0)


def test_markov_consistent_near_calibration_point(cell, edges, line, qubit):
    w1 = 0.5 * edges.omega_c_minus
    n = 200
    # a long lossy cascade closed by its image impedance emulates a matched semi-infinite line
    env = CascadeEnvironment(FiniteWaveguide.uniform(cell, n, gamma_i=3e7), float(image_impedance(w1, cell).real))
    f = calibrate_markov_coupling(w1, qubit, env, n * cell.d, group_index(w1, edges, line))
    w2 = 0.6 * edges.omega_c_minus
    gamma = markov_decay_in_band(w2, f, n * cell.d, group_index(w2, edges, line))
    assert gamma == pytest.approx(purcell_decay(w2, qubit.tuned_to(w2), env).kappa, rel=0.25)


# --- exact poles -----------------------------------------------------------------------------

def test_pole_of_shorted_port_is_dressed_frequency(qubit):
    short = ImpedanceEnvironment(lambda w: 0.0 * w)
    w = dressed_frequency(qubit)
    poles = strong_coupling_poles(qubit, short, (0.9 * w, 1.1 * w))
    assert len(poles) == 1
    assert poles[0].real == pytest.approx(w, rel=1e-10)
    assert abs(poles[0].imag) < 1e-6 * w


def test_no_root_gives_empty_list(qubit):
    short = ImpedanceEnvironment(lambda w: 0.0 * w)
    w = dressed_frequency(qubit)
    assert strong_coupling_poles(qubit, short, (1.2 * w, 1.5 * w)) == []
    with pytest.raises(DomainError):
        strong_coupling_poles(qubit, short, (2.0, 1.0))


def test_dressed_to(qubit):
    assert dressed_frequency(qubit.dressed_to(3e10)) == pytest.approx(3e10, rel=1e-14)


@pytest.mark.parametrize("frac, cg_scale", [(0.1, 1.0), (0.3, 1.0), (0.5, 1.0), (0.7, 0.1), (0.9, 0.1)])
def test_poles_reproduce_perturbation_theory(edges, env, qubit, frac, cg_scale):
    # near the upper edge the calibrated coupling is too strong for kappa/detuning < 0.01
    w = at(edges, frac)
    q = qubit.with_(cg=qubit.cg * cg_scale).dressed_to(w)
    shift = lamb_shift(w, q, env).anomalous
    kappa = purcell_decay(w, q, env).kappa
    assert kappa / min(w - edges.omega_c_minus, edges.omega_c_plus - w) < 0.01
    poles = strong_coupling_poles(q, env, (w - 0.02 * edges.delta, w + 0.02 * edges.delta))
    assert len(poles) == 1
    assert poles[0].real - w == pytest.approx(shift, rel=0.10)
    assert -2 * poles[0].imag == pytest.approx(kappa, rel=0.10)


def test_avoided_crossing_with_band_mode(cell, gamma_i, qubit):
    # nearly open far end so the band mode is a sharp resonance
    env = CascadeEnvironment(FiniteWaveguide.uniform(cell, 9, gamma_i=gamma_i), 1e6)
    mode = mode_frequencies(FiniteWaveguide.uniform(cell, 9))[1]
    splittings = []
    for det in np.linspace(-0.01, 0.01, 11):
        poles = strong_coupling_poles(qubit.dressed_to(mode * (1 + det)), env, (0.95 * mode, 1.03 * mode))
        assert len(poles) == 2
        splittings.append(poles[1].real - poles[0].real)
    assert min(splittings) > 1e-3 * mode
    assert np.argmin(splittings) not in (0, len(splittings) - 1)


# --- band-edge identity and multi-level rates ---------------------------------------------

def test_identity_scales_with_length(cell, edges, gamma_i, qubit):
    a = lifetime_slope_identity(edges.omega_c_plus, qubit, BlochEnvironment(cell, 9, gamma_i))
    b = lifetime_slope_identity(edges.omega_c_plus, qubit, BlochEnvironment(cell, 18, gamma_i))
    assert b[0] == pytest.approx(2 * a[0], rel=0.02)
    assert b[1] == pytest.approx(2 * a[1], rel=0.02)


@pytest.mark.parametrize("edge", ["lower", "upper"])
def test_identity_at_edge_with_resolving_step(cell, edges, line, gamma_i, qubit, edge):
    # T_rad ~ exp(2 x Im k), so a step well below gamma_i resolves |dT/dw| / T = 2 x |Im n_g| / c
    w = edges.omega_c_minus if edge == "lower" else edges.omega_c_plus
    env = BlochEnvironment(cell, 9, gamma_i)
    lhs, rhs = lifetime_slope_identity(w, qubit, env, step=1e-2 * gamma_i)
    assert lhs == pytest.approx(2 * rhs, rel=0.05)
    if edge == "upper":
        n_g = group_index(w, edges, line, gamma_i)
        assert abs(n_g.real) == pytest.approx(abs(n_g.imag), rel=1e-3)


def test_flat_rate_ratio_is_two(qubit):
    ge, fe = two_transition_rates(qubit, rate=lambda w: 1234.0)
    assert fe / ge == 2.0
    with pytest.raises(InvalidParameterError):
        two_transition_rates(qubit)


def test_matched_resistor_rate_ratio(qubit):
    # a frequency-independent resistor: the single-photon rate scales as w^2
    ge, fe = two_transition_rates(qubit, ImpedanceEnvironment(lambda w: 50.0 + 0j * w))
    w_ge = transmon_frequency(qubit)
    w_fe = w_ge - qubit.ec / HBAR
    assert fe / ge == pytest.approx(2 * (w_fe / w_ge) ** 2, rel=1e-3)


def test_fe_in_lower_band_decays_much_faster(edges, env, qubit):
    # g-e just inside the gap, f-e (290 MHz lower) in the lower transmission band
    target = edges.omega_c_minus + 2 * math.pi * 150e6
    p = qubit.with_(flux=0.0)
    scale = target / transmon_frequency(p)
    p = p.with_(ej_max=p.ej_max * scale**2, min_ratio=1.0)
    ge, fe = two_transition_rates(p, env)
    assert transmon_frequency(p) - p.ec / HBAR < edges.omega_c_minus
    assert fe / ge > 10


# --- calibration and predictions ---------------------------------------------------------

def test_cg_calibration(env, qubit):
    q, info = calibrate_cg(qubit.with_(cg=10e-15), env)
    assert q.cg == pytest.approx(CG, rel=2e-3)
    shifts = np.abs(info["referenced_shifts"])
    assert np.mean(shifts) == pytest.approx(2 * math.pi * 10e6, rel=1e-9)


def test_prediction_combines_lifetimes(edges, env, qubit):
    p = qubit.tuned_to(edges.omega_mid)
    pred = predict(p, env, t_int=20e-6, reference=edges.omega_mid)
    assert pred.t_rad == pytest.approx(1 / pred.kappa, rel=1e-15)
    assert 1 / pred.t1_total == pytest.approx(pred.kappa + 1 / 20e-6, rel=1e-12)
    assert pred.lamb_shift_anomalous == pytest.approx(pred.lamb_shift - lamb_shift(
        pred.omega_q_bare, p, env).capacitive, rel=1e-12)
    assert predict(p, env).t1_total == pytest.approx(pred.t_rad, rel=1e-15)


@settings(max_examples=20)
@given(st.floats(0.05, 0.95))
def test_kappa_nonnegative_across_gap(frac):
    from metawg.device import reference_cell
    from metawg.bands import dispersion_context
    cell = reference_cell()
    edges, _ = dispersion_context(cell)
    env = CascadeEnvironment(FiniteWaveguide.uniform(cell, 9, gamma_i=edges.omega_c_plus / 7.2e4))
    w = at(edges, frac)
    assert purcell_decay(w, transmon_from_frequency(7.9e9, 100.0, CG).tuned_to(w), env).kappa >= 0
