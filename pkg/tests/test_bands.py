import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from metawg.bands import (
    BandEdges,
    band_edges,
    bloch_k,
    brute_force_bands,
    circuit_dispersion,
    edge_expansion,
    edge_group_index,
    exact_bands,
    group_index,
    inverse_dispersion,
    k_grid,
    rwa_bands,
)
from metawg.circuit import (
    CapacitiveCell,
    WaveguideSpec,
    bare_dispersion,
    coupling_g,
    derive_effective,
    gap_ratio,
    resonator_port_params,
)
from metawg.constants import C_LIGHT
from metawg.errors import DomainError

TINY_CK = 1e-27


def random_cell(rng):
    c0 = rng.uniform(20e-15, 200e-15)
    return CapacitiveCell(c0=c0, l0=rng.uniform(50e-12, 500e-12), cr=rng.uniform(20e-15, 500e-15),
                          lr=rng.uniform(0.5e-9, 10e-9), ck=rng.uniform(1e-15, 300e-15), d=rng.uniform(1e-4, 1e-3))


# --- oracle: dense eigenvalues of J H_k -------------------------------------------------

def test_exact_matches_dense_eigenvalues(rng):
    for _ in range(50):
        cell = random_cell(rng)
        eff = derive_effective(cell)
        for k in np.linspace(0.05, 1.0, 7) * math.pi / cell.d:
            bf = brute_force_bands(k, eff, cell)
            ex = exact_bands(k, eff, cell)
            assert ex == pytest.approx(bf, rel=1e-10)


def test_dense_spectrum_comes_in_pairs(cell):
    eff = derive_effective(cell)
    for k in k_grid(cell.d, 21)[1:]:
        lam = brute_force_bands(k, eff, cell, return_spectrum=True)
        assert abs(lam.sum()) < 1e-8 * eff.omega0


def test_decoupled_spectrum():
    cell = CapacitiveCell(60e-15, 150e-12, 60e-15, 5e-9, TINY_CK, 350e-6)
    eff = derive_effective(cell)
    k = 0.4 * math.pi / cell.d
    omega_k = bare_dispersion(k, eff, cell)
    lam = brute_force_bands(k, eff, cell, return_spectrum=True)
    expected = np.sort([-omega_k, omega_k, -eff.omega0, eff.omega0])
    assert lam == pytest.approx(expected, rel=1e-9)
    plus, minus = exact_bands(k, eff, cell)
    assert (plus, minus) == pytest.approx((max(omega_k, eff.omega0), min(omega_k, eff.omega0)), rel=1e-9)


# --- RWA ---------------------------------------------------------------------------------

def test_rwa_special_points(cell):
    eff = derive_effective(cell)
    p = rwa_bands(0.0, eff, cell)
    assert p.omega_plus == pytest.approx(eff.omega0) and p.omega_minus == 0.0
    # resonant k: Omega_k = omega0
    from scipy.optimize import brentq
    k_res = brentq(lambda k: bare_dispersion(k, eff, cell) - eff.omega0, 1e-9, math.pi / cell.d)
    p = rwa_bands(k_res, eff, cell)
    g = coupling_g(k_res, eff, cell)
    assert p.omega_plus == pytest.approx(eff.omega0 + g, rel=1e-9)
    assert p.omega_minus == pytest.approx(eff.omega0 - g, rel=1e-9)
    assert abs(p.weights_plus[0]) == pytest.approx(1 / math.sqrt(2), rel=1e-6)
    assert abs(p.weights_plus[1]) == pytest.approx(1 / math.sqrt(2), rel=1e-6)


def test_rwa_decoupled_weights_pure():
    cell = CapacitiveCell(60e-15, 150e-12, 60e-15, 5e-9, TINY_CK, 350e-6)
    eff = derive_effective(cell)
    p = rwa_bands(0.3 * math.pi / cell.d, eff, cell)
    for w in (p.weights_plus, p.weights_minus):
        assert sorted(np.abs(w)) == pytest.approx([0.0, 1.0], abs=1e-6)


@given(st.floats(0.0, 1.0))
def test_rwa_weights_normalized_and_ordered(frac):
    cell = CapacitiveCell(59e-15, 148e-12, 59e-15, 5.6e-9, 128e-15, 350e-6)
    eff = derive_effective(cell)
    p = rwa_bands(frac * math.pi / cell.d, eff, cell)
    assert p.omega_minus <= p.omega_plus
    for wa, wb in (p.weights_plus, p.weights_minus):
        assert wa * wa + wb * wb == pytest.approx(1.0, abs=1e-10)


def test_rwa_error_scales_quadratically(cell):
    k = k_grid(cell.d)[1:]

    def max_error(c):
        eff = derive_effective(c)
        ex = np.array(exact_bands(k, eff, c))
        rwa = np.array([[rwa_bands(q, eff, c).omega_plus, rwa_bands(q, eff, c).omega_minus] for q in k]).T
        return np.max(np.abs(rwa - ex))

    # the O(g^2) law is asymptotic: it needs a small gap-to-midgap ratio
    from metawg.device import REFERENCE_LINE, cell_for_edges
    weak = cell_for_edges(REFERENCE_LINE, 6.72e9, 6.74e9)
    ratio = max_error(weak) / max_error(weak.replace(ck=weak.ck / 2))
    assert 3.2 <= ratio <= 4.8
    # strongly coupled reference device: far from the asymptotic regime
    strong = max_error(cell) / max_error(cell.replace(ck=cell.ck / 2))
    assert 1.5 < strong < 3.2


# --- band edges and gap structure -------------------------------------------------------------

def test_band_edges(cell, edges):
    eff = derive_effective(cell)
    assert edges.omega_c_plus == pytest.approx(eff.omega0, rel=1e-10)
    assert edges.delta == edges.omega_c_plus - edges.omega_c_minus
    assert edges.omega_mid == pytest.approx(0.5 * (edges.omega_c_plus + edges.omega_c_minus))


def test_band_edges_vanishing_gap():
    cell = CapacitiveCell(60e-15, 150e-12, 60e-15, 5e-9, TINY_CK, 350e-6)
    e = band_edges(derive_effective(cell), cell)
    assert e.delta == pytest.approx(0.0, abs=1e-20 * e.omega_c_plus)


def test_exact_bands_avoid_the_gap(cell, edges):
    eff = derive_effective(cell)
    k = k_grid(cell.d, 2001)[1:]
    plus, minus = exact_bands(k, eff, cell)
    omega_k = bare_dispersion(k, eff, cell)
    assert np.all(minus <= edges.omega_c_minus * (1 + 1e-12))
    assert np.all(plus >= edges.omega_c_plus * (1 - 1e-12))
    assert np.all(minus < np.minimum(omega_k, eff.omega0))
    assert np.all(plus > np.maximum(omega_k, eff.omega0))
    assert exact_bands(0.0, eff, cell)[1] == 0.0


@given(st.floats(1e-18, 1e-9), st.floats(1e-18, 1e-9), st.floats(1e-18, 1e-9))
def test_positive_cells_are_never_over_coupled(c0, cr, ck):
    # Ck^2 < (C0 + Ck)(Cr + Ck): the over-coupling guard cannot trigger for positive elements
    cell = CapacitiveCell(c0, 150e-12, cr, 5e-9, ck, 350e-6)
    eff = derive_effective(cell)
    assert gap_ratio(eff, cell) < 1
    e = band_edges(eff, cell)
    assert 0 < e.omega_c_minus <= e.omega_c_plus


# --- inverse dispersion ---------------------------------------------------------------------

def test_round_trip_both_bands(cell, edges, line):
    eff = derive_effective(cell)
    k = k_grid(cell.d, 1001)[1:-1]  # k = pi/d is a zone-boundary band edge
    plus, minus = exact_bands(k, eff, cell)
    for omega in (plus, minus):
        back = inverse_dispersion(omega, edges, line)
        assert np.max(np.abs(back.re - k) / k) < 1e-9
        assert np.all(back.im <= 1e-9 * k)


def test_inverse_dispersion_special_points(edges, line):
    k = inverse_dispersion(edges.omega_c_plus, edges, line)
    assert abs(k.re) < 1e-6 and abs(k.im) < 1e-3
    mid = inverse_dispersion(edges.omega_mid, edges, line)
    assert mid.re == pytest.approx(0.0, abs=1e-9) and mid.im > 0
    assert math.isfinite(mid.localization_length)
    pole = inverse_dispersion(edges.omega_c_minus, edges, line)
    assert pole.diverges


@given(st.floats(0.05, 3.0), st.floats(0.0, 1e-3))
def test_branch_rules(frac, loss):
    from metawg.device import reference_cell
    from metawg.bands import dispersion_context
    edges, line = dispersion_context(reference_cell())
    omega = frac * edges.omega_c_plus
    k = inverse_dispersion(omega, edges, line, loss * edges.omega_c_plus)
    if k.diverges:
        return
    assert k.im >= 0 and k.re >= 0
    if loss == 0:
        in_gap = edges.omega_c_minus < omega < edges.omega_c_plus
        if in_gap:
            assert k.re == pytest.approx(0.0, abs=1e-9 / line.d)
        elif k.re * line.d < math.pi * (1 - 1e-9):
            assert k.im == pytest.approx(0.0, abs=1e-9 / line.d)


def test_lossy_attenuation_grows_with_loss(edges, line):
    omega = edges.omega_c_plus * 1.05
    im = [inverse_dispersion(omega, edges, line, g).im for g in (1e4, 2e4)]
    assert im[1] == pytest.approx(2 * im[0], rel=0.05)


def test_continuum_variant_matches_formula(edges, line):
    omega = np.linspace(0.2, 2.0, 50) * edges.omega_c_plus
    k = inverse_dispersion(omega, edges, line, lattice=False)
    expected = line.n * omega / C_LIGHT * np.sqrt((omega**2 - edges.omega_c_plus**2 + 0j)
                                                  / (omega**2 - edges.omega_c_minus**2))
    assert np.abs(k.re + 1j * k.im) == pytest.approx(np.abs(expected), rel=1e-12)


# --- band-edge expansions ---------------------------------------------------------------------

def test_edge_expansion_examples(edges, line):
    assert edge_expansion(edges.omega_c_plus, edges, line) == 0.0
    at_delta = edge_expansion(edges.omega_c_plus + edges.delta, edges, line, edge="upper")
    assert at_delta == pytest.approx(line.n * edges.omega_c_plus / C_LIGHT, rel=1e-14)
    with pytest.raises(DomainError):
        edge_expansion(edges.omega_c_minus + 1.0, edges, line, edge="lower")
    with pytest.raises(DomainError):
        edge_expansion(edges.omega_c_plus + edges.delta / 5, edges, line, check_window=True)


def test_edge_expansion_lower_edge_prefactor(edges, line):
    # literal lower-edge expansion misses sqrt((wc+ + wc-) / (2 wc-)), about 9% for this device
    omega = edges.omega_c_minus - edges.delta / 100
    approx = edge_expansion(omega, edges, line)
    exact = inverse_dispersion(omega, edges, line, lattice=False).re
    factor = math.sqrt((edges.omega_c_plus + edges.omega_c_minus) / (2 * edges.omega_c_minus))
    assert approx * factor == pytest.approx(exact, rel=0.05)


@pytest.mark.parametrize("edge", ["lower", "upper"])
def test_edge_expansion_small_gap(edge):
    # for a small gap-to-midgap ratio the literal expansions hold within 5%
    from metawg.bands import dispersion_context
    from metawg.device import REFERENCE_LINE, cell_for_edges
    edges, line = dispersion_context(cell_for_edges(REFERENCE_LINE, 6.6e9, 6.74e9))
    if edge == "lower":
        omega = edges.omega_c_minus - edges.delta / 100
    else:
        omega = edges.omega_c_plus + edges.delta / 100
    approx = edge_expansion(omega, edges, line)
    assert approx == pytest.approx(inverse_dispersion(omega, edges, line, lattice=False).re, rel=0.05)


def test_edge_expansion_upper_edge_prefactor(edges, line):
    # the literal upper-edge expansion differs from the exact continuum result by the
    # factor 2 wc+ / (wc+ + wc-); with that factor the 5% agreement holds
    omega = edges.omega_c_plus + edges.delta / 100
    approx = edge_expansion(omega, edges, line)
    exact = inverse_dispersion(omega, edges, line, lattice=False).re
    factor = math.sqrt(2 * edges.omega_c_plus / (edges.omega_c_plus + edges.omega_c_minus))
    assert approx * factor == pytest.approx(exact, rel=0.05)
    assert abs(approx / exact - 1) < 0.10


# --- group index ------------------------------------------------------------------------------

def test_group_index_matches_finite_differences(cell, edges, line):
    eff = derive_effective(cell)
    omega = edges.omega_c_plus + edges.delta / 20
    k = inverse_dispersion(omega, edges, line).re
    h = 1e-6 * k
    wp, _ = exact_bands(k + h, eff, cell)
    wm, _ = exact_bands(k - h, eff, cell)
    ng_fd = C_LIGHT * 2 * h / (wp - wm)
    assert group_index(omega, edges, line).real == pytest.approx(ng_fd, rel=1e-6)


@given(st.floats(0.3, 2.5))
def test_group_index_is_derivative_of_bloch_k(frac):
    from metawg.device import reference_cell
    from metawg.bands import dispersion_context
    edges, line = dispersion_context(reference_cell())
    omega = frac * edges.omega_c_plus
    if min(abs(omega - edges.omega_c_minus), abs(omega - edges.omega_c_plus)) < 1e-3 * edges.delta:
        return
    gi = edges.omega_c_plus / 7.2e4
    h = 1e-7 * omega
    fd = C_LIGHT * np.conj(bloch_k(omega + h, edges, line, gi) - bloch_k(omega - h, edges, line, gi)) / (2 * h)
    ng = group_index(omega, edges, line, gi)
    assert abs(ng - fd) <= 1e-4 * abs(ng) + 1e-6


def test_edge_group_index_closed_form(edges, line, gamma_i):
    ng = edge_group_index(edges.omega_c_plus, edges, line, gamma=gamma_i / 2)
    assert abs(abs(ng.real) - abs(ng.imag)) <= 1e-6 * abs(ng.real)
    assert ng.real == pytest.approx(line.n * edges.omega_c_plus / math.sqrt(8 * edges.delta * gamma_i / 2), rel=1e-12)
    lower = edge_group_index(edges.omega_c_minus, edges, line, gamma=gamma_i / 2)
    assert abs(abs(lower.real) - abs(lower.imag)) <= 1e-6 * abs(lower.real)
    assert edge_group_index(edges.omega_c_plus, edges, line) == complex(math.inf, 0)


def test_group_index_diverges_at_lossless_edge(edges, line):
    assert math.isinf(group_index(edges.omega_c_plus, edges, line).real)


def test_lossy_edge_group_index_consistent_with_exact(edges, line, gamma_i):
    # loss inserted as a resonator pole (exact lattice) and as delta - i gamma/2 (closed form)
    exact = group_index(edges.omega_c_plus, edges, line, gamma_i)
    closed = edge_group_index(edges.omega_c_plus, edges, line, gamma=gamma_i / 2)
    factor = math.sqrt(2 * edges.omega_c_plus / (edges.omega_c_plus + edges.omega_c_minus))
    assert abs(exact) == pytest.approx(abs(closed) * factor, rel=0.10)


# --- circuit-theory dispersion -------------------------------------------------------------------

def test_circuit_dispersion_bare_line():
    spec = WaveguideSpec(50, 2.54, 350e-6)
    omega = np.linspace(1e9, 5e10, 20)
    k = circuit_dispersion(omega, spec, 4e10, 0.0, discrete=False)
    assert k.re == pytest.approx(spec.n * omega / C_LIGHT, rel=1e-14)


def test_circuit_dispersion_discrete_vs_continuum(cell, line):
    w0, ge = resonator_port_params(cell, line)
    omega = np.linspace(0.01, 0.3, 30) * w0
    d = circuit_dispersion(omega, line, w0, ge, discrete=True)
    c = circuit_dispersion(omega, line, w0, ge, discrete=False)
    small = c.re * line.d < 0.1
    assert np.any(small)
    assert d.re[small] == pytest.approx(c.re[small], rel=1e-3)


def test_circuit_dispersion_continuum_gap_edges(cell, edges, line):
    w0, ge = resonator_port_params(cell, line)
    omega = np.linspace(0.5, 1.5, 200001) * w0
    k = circuit_dispersion(omega, line, w0, ge, discrete=False)
    in_gap = omega[(k.re == 0) & (k.im > 0)]
    assert in_gap.min() == pytest.approx(edges.omega_c_minus, rel=0.02)
    assert in_gap.max() == pytest.approx(edges.omega_c_plus, rel=0.02)


def test_band_edges_from_edges_constructor():
    e = BandEdges.from_edges(1.0, 3.0)
    assert (e.delta, e.omega_mid) == (2.0, 2.0)
