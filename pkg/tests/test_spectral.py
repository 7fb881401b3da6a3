import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lissagraph import spectral
from lissagraph.errors import DegenerateSpectrum, NearNode, TrackingLost
from lissagraph.graph import Edge, LissajousPath, MetricGraph

STAR = MetricGraph.star(3)
L3 = np.array([1.0, 0.9, 0.8])


def test_interval_spectrum():
    g = MetricGraph.interval()
    for L in (1.0, 0.7):
        ks = spectral.first_roots(np.array([L]), g, 5)
        np.testing.assert_allclose(ks, np.arange(1, 6) * math.pi / L, rtol=1e-13)


def test_interval_bond_determinant_vanishes():
    g = MetricGraph.interval()
    assert abs(spectral.secular_bond(math.pi, np.array([1.0]), g)) < 1e-10


def test_star_roots_agree_with_vertex_matrix():
    a = spectral.roots_at_lengths(L3, STAR, 40.0, method="star")
    b = spectral.roots_at_lengths(L3, STAR, 40.0, method="vertex")
    assert a.size == b.size
    np.testing.assert_allclose(a, b, atol=1e-11)


def test_star_roots_are_bond_determinant_zeros():
    ks = spectral.first_roots(L3, STAR, 20)
    scale = np.abs(spectral.secular_bond(ks + 0.05, L3, STAR))
    res = np.abs(spectral.secular_bond(ks, L3, STAR))
    assert np.all(res < 1e-9 * np.maximum(scale, 1.0))


def test_star_roots_interlace_poles():
    ks = spectral.first_roots(L3, STAR, 30)
    poles = np.sort(np.concatenate([(np.arange(40) + 0.5) * math.pi / L for L in L3]))
    counts = np.histogram(ks, bins=poles)[0]
    assert np.all(counts[: np.searchsorted(poles, ks[-1])] <= 1)


def test_weyl_count():
    total = L3.sum()
    K = 80.0
    n = spectral.roots_at_lengths(L3, STAR, K).size
    assert abs(n - K * total / math.pi) <= STAR.n_edges + STAR.n_vertices


def test_general_graph_roots_match_bond_oracle():
    # triangle with a pendant edge
    g = MetricGraph((0, 1, 2, 3), (Edge("a", 0, 1), Edge("b", 1, 2), Edge("c", 2, 0), Edge("d", 2, 3)))
    L = np.array([1.0, 0.83, 0.71, 0.55])
    ks = spectral.roots_at_lengths(L, g, 15.0, method="vertex")
    assert ks.size > 5
    grid = np.linspace(0.05, 15.0, 20001)
    z = spectral.secular_bond_real(grid, L, g)
    full = np.abs(spectral.secular_bond(grid, L, g))
    # the normalised determinant is real, so no magnitude is lost in taking its real part
    assert np.max(np.abs(full - np.abs(z))) < 1e-9
    sign_changes = np.sum(np.diff(np.sign(z)) != 0)
    assert sign_changes == ks.size
    for k in ks:
        st = spectral.eigenstate(k, L, g)
        cont, curr = spectral.vertex_residuals(st, g)
        assert cont < 1e-9 and curr < 1e-8


def test_first_root_lower_bound():
    ks = spectral.first_roots(L3, STAR, 1)
    assert ks[0] >= math.pi / L3.sum()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.3, 2.0), min_size=3, max_size=3, unique=True))
def test_first_root_bound_random(L):
    L = np.array(L)
    if np.min(np.diff(np.sort(L))) < 1e-3:
        return
    ks = spectral.first_roots(L, STAR, 3)
    assert ks[0] >= math.pi / L.sum() - 1e-12
    assert np.all(np.diff(ks) > 0)


def test_triple_coincidence_is_degenerate():
    with pytest.raises(DegenerateSpectrum):
        spectral.first_roots(np.array([1.0, 1.0, 1.0]), STAR, 5)


def test_pinned_root_for_two_equal_edges():
    L = np.array([1.0, 1.0, 0.7])
    ks = spectral.first_roots(L, STAR, 3)
    assert np.any(np.abs(ks - math.pi / 2) < 1e-12)


def test_near_node_raised():
    L = np.array([1.0, 1.0, 0.7])
    with pytest.raises(NearNode):
        spectral.eigen_data_star(math.pi / 2, L)


def test_moments_closed_form_vs_quadrature():
    ks = spectral.first_roots(L3, STAR, 30)
    closed = spectral.moment_star(ks, L3)
    for k, m in zip(ks, closed):
        q = spectral.state_moments(spectral.general_eigenstate(k, L3, STAR))
        np.testing.assert_allclose(m, q, atol=1e-11)


def test_moment_small_argument_series():
    x = np.array([1e-4, 1e-2, 0.049, 0.051])
    direct = -(3 * np.sin(2 * x) - 3 * x * np.cos(2 * x) - 3 * x + 2 * x**3) / (24 * x**3)
    series = spectral._moment_kernel(x)
    np.testing.assert_allclose(series[2:], -direct[2:], rtol=1e-7)
    np.testing.assert_allclose(series[:2], 1 / 6 - x[:2] ** 2 / 20, rtol=1e-6)


def test_ground_state_moments():
    m = spectral.ground_state_moments(L3)
    np.testing.assert_allclose(m, -L3 / (6 * L3.sum()))
    out = spectral.level_moments_at(np.array([0.0]), L3, STAR)
    np.testing.assert_allclose(out[0], m)


def test_eigenstate_normalized_and_positive_amplitude():
    k = spectral.first_roots(L3, STAR, 4)[3]
    a, N2 = spectral.eigen_data_star(k, L3)
    assert a[0] > 0
    st_ = spectral.star_eigenstate(k, L3)
    xi, w = spectral.gauss_legendre(256)
    norm = np.sum(np.abs(st_.values(xi)) ** 2 @ w)
    assert abs(norm - 1) < 1e-12


def test_secular_star_pole_free_form():
    ks = spectral.first_roots(L3, STAR, 10)
    assert np.max(np.abs(spectral.secular_star(ks, L3))) < 1e-12


def test_bond_matrix_similar_to_unitary():
    S = spectral.bond_scattering_matrix(L3, STAR)
    ev = np.linalg.eigvals(S)
    np.testing.assert_allclose(np.abs(ev), 1.0, atol=1e-12)


def test_roots_permutation_equivariant():
    perm = [2, 0, 1]
    a = spectral.first_roots(L3, STAR, 15)
    b = spectral.first_roots(L3[perm], STAR, 15)
    np.testing.assert_allclose(a, b, atol=1e-12)
    ma = spectral.moment_star(a, L3)
    mb = spectral.moment_star(b, L3[perm])
    np.testing.assert_allclose(ma[:, perm], mb, atol=1e-12)


def test_track_levels_closed_curves():
    p = LissajousPath([1.0, 1.5, 2.1], [0.2] * 3, [2, 3, 5], [0, 0.2, 2.5])
    curves = spectral.track_levels(STAR, p, 6, np.linspace(0, 1, 401), with_moments=True)
    assert [c.level for c in curves] == list(range(6))
    assert np.all(curves[0].k == 0)
    for c in curves:
        assert c.closure_error < 1e-12
        assert c.moments.shape == (401, 3)
    K = np.stack([c.k for c in curves], axis=1)
    assert np.all(np.diff(K, axis=1) > 0)
    pts = curves[2].points
    assert len(pts) == 401 and pts[0].level == 2


def test_track_levels_lost_root_detected(monkeypatch):
    p = LissajousPath([1.0, 1.5, 2.1], [0.2] * 3, [2, 3, 5], [0, 0.2, 2.5])
    real = spectral.spectrum_on_grid

    def dropping(*args, **kwargs):
        K = real(*args, **kwargs)
        K[50, 3:-1] = K[50, 4:]  # lose level 3 at one node
        return K

    monkeypatch.setattr(spectral, "spectrum_on_grid", dropping)
    with pytest.raises(TrackingLost) as info:
        spectral.track_levels(STAR, p, 8, np.linspace(0, 1, 201))
    assert info.value.tau == pytest.approx(0.25) and info.value.level == 3


def test_static_path_spectrum():
    p = LissajousPath(L3, 0.0, [1, 2, 3], 0.0)
    K = spectral.spectrum_on_grid(STAR, p, 5, np.linspace(0, 1, 3))
    np.testing.assert_allclose(K[0], K[-1])
    np.testing.assert_allclose(K[0, 1:5], spectral.first_roots(L3, STAR, 4))
