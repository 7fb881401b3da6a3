import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lissagraph.errors import (
    DisconnectedGraph,
    IndexingError,
    LoopEdge,
    NonPositiveLength,
    NotCoprime,
    WrongDimension,
)
from lissagraph.graph import Edge, LissajousPath, MetricGraph, knot_polyline, sample_path, validate


def unknot():
    return LissajousPath([1, 1, 1], [0.2] * 3, [2, 3, 5], [0, math.pi / 15, 9 * math.pi / 11])


def test_star_structure():
    g = MetricGraph.star(3)
    assert g.n_edges == 3 and g.n_vertices == 4
    assert g.degree == {0: 3, 1: 1, 2: 1, 3: 1}
    assert g.star_center() == 0
    assert g.edge_ends()[0] == [(0, 0), (1, 0), (2, 0)]


def test_interval_is_one_edge_star():
    g = MetricGraph.interval()
    assert g.star_center() == 0
    assert g.degree == {0: 1, 1: 1}


def test_multi_edge_allowed_but_not_a_star():
    g = MetricGraph(("a", "b"), (Edge(1, "a", "b"), Edge(2, "a", "b")))
    assert g.degree == {"a": 2, "b": 2}
    assert g.star_center() is None


@pytest.mark.parametrize(
    "vertices, edges, exc",
    [
        ((0, 1), ((1, 0, 0),), LoopEdge),
        ((0, 1, 2), ((1, 0, 1),), DisconnectedGraph),
        ((0, 1), ((1, 0, 5),), IndexingError),
        ((0, 0, 1), ((1, 0, 1),), IndexingError),
        ((0, 1), ((1, 0, 1), (1, 1, 0)), IndexingError),
    ],
)
def test_graph_rejects(vertices, edges, exc):
    with pytest.raises(exc):
        MetricGraph(vertices, edges)


def test_validate_errors():
    g = MetricGraph.star(3)
    with pytest.raises(WrongDimension):
        validate(g, LissajousPath([1, 1], [0.1, 0.1], [1, 2], [0, 0]))
    with pytest.raises(NonPositiveLength):
        validate(g, LissajousPath([1, 1, 1], [0.1, 1.0, 0.1], [1, 2, 3], 0))
    with pytest.raises(NonPositiveLength):
        validate(g, LissajousPath([1, -1, 1], 0.0, [1, 2, 3], 0))
    with pytest.raises(NotCoprime):
        validate(g, LissajousPath([1, 1, 1], 0.1, [2, 4, 6], 0))
    with pytest.raises(NotCoprime):
        LissajousPath([1, 1, 1], 0.1, [2, 3.5, 5], 0)
    # inactive edges do not take part in the coprimality test
    validate(g, LissajousPath([1, 1, 1], [0.1, 0.1, 0.0], [3, 5, 15], 0))
    validate(g, LissajousPath([1, 1, 1], [0.1, 0.0, 0.0], [1, 4, 4], 0))


def test_sample_path_identities():
    p = unknot()
    tau = np.linspace(0, 1, 11)
    s = sample_path(p, tau)
    assert s.L.shape == (11, 3)
    np.testing.assert_allclose(s.L[0], s.L[-1], atol=1e-15)
    np.testing.assert_allclose(s.ddL2, 2 * (s.L * s.ddL + s.dL**2))
    np.testing.assert_allclose(s.L, p.lengths(tau))


def test_sample_path_derivatives_match_differences():
    p = unknot()
    h = 1e-5
    t = 0.3141
    s = sample_path(p, t)
    fd1 = (p.lengths(t + h) - p.lengths(t - h)) / (2 * h)
    fd2 = (p.lengths(t + h) - 2 * p.lengths(t) + p.lengths(t - h)) / h**2
    np.testing.assert_allclose(s.dL, fd1, rtol=1e-7)
    np.testing.assert_allclose(s.ddL, fd2, rtol=1e-4)


def test_static_edge_is_constant():
    p = LissajousPath([1, 2], [0.0, 0.5], [1, 1], [0, 0])
    s = sample_path(p, np.linspace(0, 1, 7))
    assert np.all(s.L[:, 0] == 1.0)
    assert np.all(s.dL[:, 0] == 0.0) and np.all(s.ddL[:, 0] == 0.0)


def test_canonical_keeps_curve():
    p = LissajousPath([1, 1, 1], [0.2] * 3, [2, 3, 5], [0.7, 1.1, 2.0])
    c = p.canonical()
    assert c.alpha[0] == 0.0
    shift = 0.7 / (2 * math.pi * 2)
    tau = np.linspace(0, 1, 9)
    np.testing.assert_allclose(c.lengths(tau), p.lengths(tau - shift), atol=1e-13)


def test_permutation_equivariance():
    p = unknot()
    q = p.permuted([2, 0, 1])
    tau = np.linspace(0, 1, 5)
    np.testing.assert_array_equal(q.lengths(tau), p.lengths(tau)[:, [2, 0, 1]])
    np.testing.assert_array_equal(sample_path(q, tau).ddL2, sample_path(p, tau).ddL2[:, [2, 0, 1]])


def test_knot_polyline_closed():
    pts = knot_polyline(unknot(), 101)
    assert pts.shape == (101, 3)
    np.testing.assert_array_equal(pts[0], pts[-1])
    with pytest.raises(WrongDimension):
        knot_polyline(LissajousPath([1, 1], 0.1, [1, 2], 0), 10)


def test_path_is_immutable():
    p = unknot()
    with pytest.raises(ValueError):
        p.Lbar[0] = 3.0


@settings(max_examples=40, deadline=None)
@given(
    Lbar=st.lists(st.floats(0.2, 3.0), min_size=1, max_size=5),
    frac=st.floats(0.0, 0.95),
    nu0=st.integers(1, 9),
    tau=st.floats(0.0, 1.0),
)
def test_lengths_stay_positive(Lbar, frac, nu0, tau):
    n = len(Lbar)
    p = LissajousPath(Lbar, np.array(Lbar) * frac, [nu0 + i for i in range(n)], np.arange(n) * 0.3)
    assert np.all(p.lengths(tau) > 0)
    assert np.all(np.abs(p.lengths(tau) - p.lengths(tau + 1.0)) < 1e-12)
