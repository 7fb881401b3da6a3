"""Instantaneous spectrum of the scaled graph Laplacian at frozen ``tau``.

At fixed lengths ``L`` the scaled problem is ``-g_e'' = (k L_e)^2 g_e`` on
``xi in [-1/2, 1/2]`` with the weighted vertex conditions

* ``L_e^{-1/2} g_e(v)`` equal for all edges at ``v``;
* ``sum_e L_e^{-3/2} d g_e / d n (v) = 0`` (derivatives pointing into the edges).

Writing ``g_e = L_e^{1/2} psi_e`` turns this into the standard
Neumann-Kirchhoff problem for ``psi`` on a graph with lengths ``L``, so every
edge function is ``L_e^{1/2} (A_e cos(kL_e s) + B_e sin(kL_e s))`` with
``s = xi + 1/2``.

Three secular functions are provided:

``secular_star``
    pole-free ``sum_e sin(kL_e) prod_{f != e} cos(kL_f)`` for star graphs.
``secular_general``
    ``det(I - S D)`` with the (non-unitary) weighted bond scattering matrix.
``vertex_secular``
    determinant of the real ``2E x 2E`` matching-condition matrix acting on
    ``(A_e, B_e)``.  Entire in ``k`` and used to bracket roots on general graphs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSpectrum, IndexingError, NearNode, NumericalError, TrackingLost
from .graph import LissajousPath, MetricGraph, sample_path

ROOT_TOL = 1e-13
NEAR_NODE_TOL = 1e-10
GAUSS_ORDER = 256


def default_gap_tol(total_length: float) -> float:
    return 1e-6 * math.pi / total_length


# --- quadrature -------------------------------------------------------------


@lru_cache(maxsize=16)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[-1/2, 1/2]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * x
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def moment_quadrature(g: Callable[[np.ndarray], np.ndarray], order: int = GAUSS_ORDER) -> float:
    """``int_{-1/2}^{1/2} (xi^2 - 1/4) |g(xi)|^2 dxi`` by Gauss-Legendre."""
    if order < 64:
        raise ValueError("quadrature order must be at least 64")
    x, w = gauss_legendre(order)
    vals = np.abs(np.asarray(g(x))) ** 2
    return float(np.sum(w * (x * x - 0.25) * vals))


# --- secular functions ------------------------------------------------------


def _prod_except(c: np.ndarray) -> np.ndarray:
    """``out[..., e] = prod_{f != e} c[..., f]`` without division."""
    n = c.shape[-1]
    out = np.ones_like(c)
    for e in range(n):
        for f in range(n):
            if f != e:
                out[..., e] = out[..., e] * c[..., f]
    return out


def secular_star(k, L) -> np.ndarray | float:
    """Pole-free star secular function ``sum_e sin(kL_e) prod_{f!=e} cos(kL_f)``.

    Vectorised over ``k``; ``L`` has shape ``(E,)``.
    """
    kl = np.multiply.outer(np.asarray(k, float), np.asarray(L, float))
    out = np.sum(np.sin(kl) * _prod_except(np.cos(kl)), axis=-1)
    return out if out.ndim else float(out)


def _secular_star_dk(k, L) -> np.ndarray:
    L = np.asarray(L, float)
    kl = np.multiply.outer(np.asarray(k, float), L)
    s, c = np.sin(kl), np.cos(kl)
    n = L.size
    total = np.zeros(kl.shape[:-1])
    for e in range(n):
        # d/dk of sin(kL_e) prod_{f!=e} cos(kL_f)
        others = [f for f in range(n) if f != e]
        term = L[e] * c[..., e]
        for f in others:
            term = term * c[..., f]
        total = total + term
        for f in others:
            t = -L[f] * s[..., f] * s[..., e]
            for g in others:
                if g != f:
                    t = t * c[..., g]
            total = total + t
    return total


def bond_scattering_matrix(L, graph: MetricGraph) -> np.ndarray:
    """Weighted ``2E x 2E`` bond scattering matrix.

    Bond ``2i`` runs tail->head along edge ``i``, bond ``2i+1`` head->tail.
    ``S[j', j] = (2/d_v) (L_j'/L_j)^{1/2} - delta_{j', rev(j)}`` when ``j'`` leaves
    the vertex ``v`` where ``j`` ends.  ``S`` is similar to the unitary
    Neumann-Kirchhoff matrix but is not unitary itself.
    """
    L = np.asarray(L, float)
    E = graph.n_edges
    if L.shape != (E,):
        raise IndexingError(f"expected {E} lengths, got shape {L.shape}")
    vidx = graph.vertex_index
    start = np.empty(2 * E, dtype=int)
    end = np.empty(2 * E, dtype=int)
    for i, e in enumerate(graph.edges):
        start[2 * i], end[2 * i] = vidx[e.tail], vidx[e.head]
        start[2 * i + 1], end[2 * i + 1] = vidx[e.head], vidx[e.tail]
    deg = np.bincount(np.concatenate([start[::2], end[::2]]), minlength=graph.n_vertices)
    bond_len = np.repeat(L, 2)
    S = np.zeros((2 * E, 2 * E))
    for j in range(2 * E):
        v = end[j]
        outgoing = np.nonzero(start == v)[0]
        if outgoing.size != deg[v]:
            raise IndexingError("bond maps are inconsistent with vertex degrees")
        for jp in outgoing:
            S[jp, j] = 2.0 / deg[v] * math.sqrt(bond_len[jp] / bond_len[j])
        S[j ^ 1, j] -= 1.0
    return S


def secular_bond(k, L, graph: MetricGraph):
    """``det(I - S D(k))`` at lengths ``L``; vectorised over ``k``."""
    S = bond_scattering_matrix(L, graph)
    k = np.asarray(k, float)
    phases = np.exp(1j * np.multiply.outer(k, np.repeat(np.asarray(L, float), 2)))
    M = np.eye(S.shape[0]) - S * phases[..., None, :]
    out = np.linalg.det(M)
    return out if out.ndim else complex(out)


def secular_bond_real(k, L, graph: MetricGraph):
    """Real form ``exp(-i k sum L) det(I - S D(k)) / sqrt(det S)``.

    ``S`` is real and similar to an orthogonal matrix, so ``det S = +-1`` and
    the result is real up to roundoff; its sign changes bracket the spectrum.
    """
    L = np.asarray(L, float)
    k = np.asarray(k, float)
    d = np.linalg.det(bond_scattering_matrix(L, graph))
    z = secular_bond(k, L, graph) * np.exp(-1j * k * L.sum()) / np.sqrt(complex(d))
    return np.real(z)


def secular_general(k, tau: float, graph: MetricGraph, path: LissajousPath):
    """Bond-determinant secular function ``zeta(k; tau)``."""
    if np.any(np.asarray(k) <= 0):
        raise ValueError("k must be positive")
    return secular_bond(k, path.lengths(tau), graph)


def vertex_matrix(k, L, graph: MetricGraph) -> np.ndarray:
    """Real matching-condition matrix on the amplitudes ``(A_e, B_e)``.

    Rows per vertex of degree ``d``: ``d - 1`` continuity rows for
    ``L_e^{-1/2} g_e`` and one weighted current row.  Shape ``(..., 2E, 2E)``.
    """
    L = np.asarray(L, float)
    k = np.asarray(k, float)
    kl = np.multiply.outer(k, L)
    c, s = np.cos(kl), np.sin(kl)
    E = graph.n_edges
    M = np.zeros(k.shape + (2 * E, 2 * E))
    # value / inward derivative (divided by k) of psi_e at each end, as rows over (A_e, B_e)
    ones = np.ones_like(c)
    zeros = np.zeros_like(c)
    val = {0: (ones, zeros), 1: (c, s)}
    der = {0: (zeros, ones), 1: (s, -c)}
    row = 0
    for v, ends in graph.edge_ends().items():
        e0, end0 = ends[0]
        for e1, end1 in ends[1:]:
            a0, b0 = val[end0]
            a1, b1 = val[end1]
            M[..., row, 2 * e0] += a0[..., e0]
            M[..., row, 2 * e0 + 1] += b0[..., e0]
            M[..., row, 2 * e1] -= a1[..., e1]
            M[..., row, 2 * e1 + 1] -= b1[..., e1]
            row += 1
        for e, end in ends:
            a, b = der[end]
            M[..., row, 2 * e] += a[..., e]
            M[..., row, 2 * e + 1] += b[..., e]
        row += 1
    assert row == 2 * E
    return M


def vertex_secular(k, L, graph: MetricGraph):
    out = np.linalg.det(vertex_matrix(k, L, graph))
    return out if np.ndim(out) else float(out)


# --- root finding -----------------------------------------------------------


def _bisect(f, a: np.ndarray, b: np.ndarray, fa: np.ndarray, tol: float = ROOT_TOL) -> np.ndarray:
    """Vectorised bisection; each ``[a_i, b_i]`` must bracket a sign change."""
    a = a.copy()
    b = b.copy()
    fa = fa.copy()
    for _ in range(200):
        width = b - a
        if np.all(width <= tol):
            break
        m = 0.5 * (a + b)
        fm = f(m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
        exact = fm == 0.0
        a = np.where(exact, m, a)
        b = np.where(exact, m, b)
    return a, b


def _star_roots(L: np.ndarray, k_max: float) -> np.ndarray:
    """Roots of the star secular function in ``(0, k_max]``.

    ``sum tan(kL_e)`` increases between consecutive poles, so each gap between
    sorted poles ``(m + 1/2) pi / L_e`` holds exactly one root; poles that
    coincide pin a root onto the pole itself.
    """
    poles = []
    for Le in L:
        m = np.arange(0, int(math.floor(k_max * Le / math.pi - 0.5)) + 1)
        poles.append((m + 0.5) * math.pi / Le)
    poles = np.sort(np.concatenate(poles)) if poles else np.empty(0)
    poles = poles[poles <= k_max]
    if poles.size == 0:
        return np.empty(0)
    lo = list(poles[:-1])
    hi = list(poles[1:])
    f_last = secular_star(poles[-1], L)
    f_kmax = secular_star(k_max, L)
    if f_kmax == 0.0 or np.sign(f_kmax) != np.sign(f_last):
        lo.append(poles[-1])
        hi.append(k_max)
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    if lo.size == 0:
        return np.empty(0)
    f = lambda k: secular_star(k, L)
    flo = f(lo)
    fhi = f(hi)
    pinned = (hi - lo <= 8 * np.finfo(float).eps * hi) | (np.sign(flo) == np.sign(fhi))
    # coarse bisection, then Newton polish kept inside the bracket
    a, b = _bisect(f, lo, np.where(pinned, lo, hi), flo, tol=max(ROOT_TOL, 1e-7))
    roots = np.where(pinned, 0.5 * (lo + hi), 0.5 * (a + b))
    for _ in range(3):
        df = _secular_star_dk(roots, L)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f(roots) / df
        cand = roots - step
        ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi) & ~pinned
        roots = np.where(ok, cand, roots)
    return roots


def _scan_roots(f, k_max: float, step: float) -> np.ndarray:
    """Sign-change bracketing of ``f`` on a uniform grid over ``[step, k_max]``."""
    n = max(int(math.ceil((k_max - step) / step)), 1) + 1
    grid = np.linspace(step, k_max, n)
    vals = f(grid)
    exact = grid[vals == 0.0]
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if idx.size:
        a, b = _bisect(f, grid[idx], grid[idx + 1], vals[idx])
        found = 0.5 * (a + b)
    else:
        found = np.empty(0)
    return np.sort(np.concatenate([found, exact]))


def roots_at_lengths(
    L,
    graph: MetricGraph,
    k_max: float,
    gap_tol: float | None = None,
    method: str | None = None,
    tau: float | None = None,
) -> np.ndarray:
    """Sorted positive eigen-wavenumbers ``k <= k_max`` at fixed lengths."""
    L = np.asarray(L, float)
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    total = float(L.sum())
    gap_tol = default_gap_tol(total) if gap_tol is None else gap_tol
    if method is None:
        method = "star" if graph.star_center() is not None else "vertex"
    if method == "star":
        roots = _star_roots(L, k_max)
    elif method == "vertex":
        roots = _scan_roots(lambda k: vertex_secular(k, L, graph), k_max, math.pi / (40 * total))
    else:
        raise ValueError(f"unknown method {method!r}")
    if roots.size > 1:
        gaps = np.diff(roots)
        i = int(np.argmin(gaps))
        if gaps[i] < gap_tol:
            raise DegenerateSpectrum(
                f"roots {roots[i]:.12g} and {roots[i + 1]:.12g} closer than gap_tol={gap_tol:.3g}",
                tau=tau,
                level=i + 1,
            )
    weyl = k_max * total / math.pi
    if abs(roots.size - weyl) > graph.n_edges + graph.n_vertices:
        raise NumericalError(
            f"found {roots.size} roots below {k_max}, Weyl estimate {weyl:.2f}", tau=tau
        )
    return roots


def find_roots(
    tau: float,
    graph: MetricGraph,
    path: LissajousPath,
    k_max: float,
    gap_tol: float | None = None,
    method: str | None = None,
) -> np.ndarray:
    """All eigen-wavenumbers in ``(0, k_max]`` at parameter time ``tau``."""
    if gap_tol is None:
        gap_tol = default_gap_tol(path.total_mean_length)
    return roots_at_lengths(path.lengths(tau), graph, k_max, gap_tol, method, tau=tau)


def first_roots(L, graph: MetricGraph, n: int, gap_tol=None, method=None, tau=None) -> np.ndarray:
    """The first ``n`` positive roots, growing ``k_max`` as needed."""
    L = np.asarray(L, float)
    total = float(L.sum())
    k_max = (n + graph.n_edges + graph.n_vertices + 1) * math.pi / total
    while True:
        roots = roots_at_lengths(L, graph, k_max, gap_tol, method, tau)
        if roots.size >= n:
            return roots[:n]
        k_max *= 1.5


# --- eigenfunctions ---------------------------------------------------------


@dataclass(frozen=True)
class Eigenstate:
    """Normalised eigenfunction ``g_e(xi) = L_e^{1/2} (A_e cos(k L_e s) + B_e sin(k L_e s))``."""

    k: float
    L: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def values(self, xi) -> np.ndarray:
        """Shape ``(E, len(xi))``."""
        s = np.asarray(xi, float) + 0.5
        kl = (self.k * self.L)[:, None]
        return np.sqrt(self.L)[:, None] * (
            self.A[:, None] * np.cos(kl * s) + self.B[:, None] * np.sin(kl * s)
        )

    def derivative(self, xi) -> np.ndarray:
        s = np.asarray(xi, float) + 0.5
        kl = (self.k * self.L)[:, None]
        return np.sqrt(self.L)[:, None] * kl * (
            -self.A[:, None] * np.sin(kl * s) + self.B[:, None] * np.cos(kl * s)
        )

    def edge(self, e: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda xi: self.values(xi)[e]


def _edge_norms(k, L, A, B) -> np.ndarray:
    kl = k * L
    s2 = np.sin(2 * kl) / (4 * kl)
    return L * (A * A * (0.5 + s2) + B * B * (0.5 - s2) + A * B * np.sin(kl) ** 2 / kl)


def _check_generic(k, L, tau=None):
    c = np.cos(np.multiply.outer(np.asarray(k, float), np.asarray(L, float)))
    if np.any(np.abs(c) < NEAR_NODE_TOL):
        raise NearNode("cos(kL_e) vanishes on an edge; star amplitudes undefined", tau=tau)
    return c


def eigen_data_star(k, L, tau=None) -> tuple[np.ndarray, np.ndarray]:
    """Normalised star amplitudes and the normalisation ``N^2``.

    With ``c_e = prod_{f != e} cos(k L_f)``, ``N^2 = 1/2 sum_e L_e c_e^2 (1 + sin(2kL_e)/(2kL_e))``
    and ``a_e = c_e / N`` (sign chosen so that ``a_1 > 0``).  Vectorised over ``k``.
    """
    L = np.asarray(L, float)
    k_arr = np.asarray(k, float)
    c = _check_generic(k_arr, L, tau)
    amp = _prod_except(c)
    kl = np.multiply.outer(k_arr, L)
    N2 = 0.5 * np.sum(L * amp**2 * (1.0 + np.sin(2 * kl) / (2 * kl)), axis=-1)
    a = amp / np.sqrt(N2)[..., None]
    a = a * np.where(a[..., :1] < 0, -1.0, 1.0)
    return a, N2


def star_eigenstate(k: float, L) -> Eigenstate:
    L = np.asarray(L, float)
    a, _ = eigen_data_star(k, L)
    kl = k * L
    # cos(kL(xi - 1/2)) = cos(kL) cos(kL s) + sin(kL) sin(kL s)
    return Eigenstate(k=float(k), L=L, A=a * np.cos(kl), B=a * np.sin(kl))


def _moment_kernel(kl: np.ndarray) -> np.ndarray:
    """``int (xi^2 - 1/4) cos^2(kl (xi - 1/2)) dxi``, negated: ``B(kl) / (24 kl^3)``."""
    small = kl < 0.05
    safe = np.where(small, 1.0, kl)
    direct = (
        3 * np.sin(2 * safe) - 3 * safe * np.cos(2 * safe) - 3 * safe + 2 * safe**3
    ) / (24 * safe**3)
    x2 = kl * kl
    series = 1 / 6 - x2 / 20 + x2**2 / 126 - x2**3 / 1620
    return np.where(small, series, direct)


def moment_star(k, L, tau=None) -> np.ndarray:
    """Closed-form ``<xi_e^2 - 1/4>`` for a star eigenstate; shape ``(..., E)``.

    ``m_e = -L_e a_e^2 (3 sin 2x - 3x cos 2x - 3x + 2x^3) / (24 x^3)`` with
    ``x = k L_e`` and normalised amplitudes ``a_e``.
    """
    L = np.asarray(L, float)
    a, _ = eigen_data_star(k, L, tau)
    kl = np.multiply.outer(np.asarray(k, float), L)
    return -L * a * a * _moment_kernel(kl)


def general_eigenstate(k: float, L, graph: MetricGraph) -> Eigenstate:
    """Eigenfunction from the null vector of the matching-condition matrix."""
    L = np.asarray(L, float)
    M = vertex_matrix(k, L, graph)
    _, sv, vt = np.linalg.svd(M)
    vec = vt[-1]
    A, B = vec[0::2].copy(), vec[1::2].copy()
    norm = float(np.sum(_edge_norms(k, L, A, B)))
    A /= math.sqrt(norm)
    B /= math.sqrt(norm)
    lead = int(np.argmax(np.abs(A) + np.abs(B)))
    sign = np.sign(A[lead]) if abs(A[lead]) > abs(B[lead]) else np.sign(B[lead])
    return Eigenstate(k=float(k), L=L, A=sign * A, B=sign * B)


def eigenstate(k: float, L, graph: MetricGraph) -> Eigenstate:
    if graph.star_center() is not None:
        try:
            return star_eigenstate(k, L)
        except NearNode:
            pass
    return general_eigenstate(k, L, graph)


def state_moments(state: Eigenstate, order: int = GAUSS_ORDER) -> np.ndarray:
    return np.array([moment_quadrature(state.edge(e), order) for e in range(state.L.size)])


def ground_state_moments(L) -> np.ndarray:
    """``-L_e / (6 sum L)`` for the piecewise-constant ground state."""
    L = np.asarray(L, float)
    return -L / (6.0 * L.sum(axis=-1, keepdims=True))


def vertex_residuals(state: Eigenstate, graph: MetricGraph) -> tuple[float, float]:
    """Max continuity mismatch of ``L^{-1/2} g`` and max weighted current sum."""
    ends = np.array([-0.5, 0.5])
    vals = state.values(ends) / np.sqrt(state.L)[:, None]
    ders = state.derivative(ends) * state.L[:, None] ** -1.5
    cont = 0.0
    curr = 0.0
    for v, items in graph.edge_ends().items():
        vv = [vals[e, end] for e, end in items]
        cont = max(cont, max(abs(x - vv[0]) for x in vv))
        # inward derivative: +d/dxi at xi=-1/2, -d/dxi at xi=+1/2
        curr = max(curr, abs(sum(ders[e, end] * (1 if end == 0 else -1) for e, end in items)))
    return cont, curr


# --- levels along the path --------------------------------------------------


@dataclass(frozen=True)
class SpectralPoint:
    tau: float
    level: int
    k: float
    moments: np.ndarray
    amplitudes: np.ndarray | None = None
    norm_sq: float | None = None


@dataclass(frozen=True)
class LevelCurve:
    level: int
    tau_grid: np.ndarray
    k: np.ndarray
    moments: np.ndarray | None = None

    @property
    def closure_error(self) -> float:
        return float(abs(self.k[-1] - self.k[0]))

    @property
    def points(self) -> list[SpectralPoint]:
        m = self.moments
        return [
            SpectralPoint(float(t), self.level, float(kk), None if m is None else m[i])
            for i, (t, kk) in enumerate(zip(self.tau_grid, self.k))
        ]


def level_moments_at(k: np.ndarray, L, graph: MetricGraph, tau=None) -> np.ndarray:
    """Moments for an array of roots ``k`` (``k = 0`` means the ground state)."""
    L = np.asarray(L, float)
    k = np.asarray(k, float)
    out = np.empty(k.shape + (L.size,))
    ground = k == 0
    out[ground] = ground_state_moments(L)
    pos = np.nonzero(~ground)[0]
    if pos.size == 0:
        return out
    if graph.star_center() is not None:
        try:
            out[pos] = moment_star(k[pos], L, tau)
            return out
        except NearNode:
            pass
    for i in pos:
        out[i] = state_moments(eigenstate(float(k[i]), L, graph))
    return out


def spectrum_on_grid(
    graph: MetricGraph,
    path: LissajousPath,
    n_levels: int,
    tau_grid: Sequence[float],
    gap_tol: float | None = None,
    extra: int = 2,
) -> np.ndarray:
    """``k`` for levels ``0..n_levels-1`` (plus ``extra`` guard roots) at each node."""
    tau_grid = np.asarray(tau_grid, float)
    if gap_tol is None:
        gap_tol = default_gap_tol(path.total_mean_length)
    L_all = path.lengths(tau_grid)
    n_pos = n_levels - 1 + extra
    out = np.zeros((tau_grid.size, n_pos + 1))
    for i, (t, L) in enumerate(zip(tau_grid, L_all)):
        if n_pos:
            out[i, 1:] = first_roots(L, graph, n_pos, gap_tol, tau=float(t))
    return out


def track_levels(
    graph: MetricGraph,
    path: LissajousPath,
    n_levels: int,
    tau_grid: Sequence[float],
    gap_tol: float | None = None,
    with_moments: bool = False,
) -> list[LevelCurve]:
    """Follow levels ``0..n_levels-1`` over ``tau_grid``.

    Every node is solved with the gap check, so the spectrum is simple there
    and the sorted index is the adiabatic label.  Between nodes each level may
    move by at most ``k max|L'/L| dtau`` (Hellmann-Feynman); a larger jump
    means a root was lost or the grid is too coarse and raises
    :class:`TrackingLost`.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    tau_grid = np.asarray(tau_grid, float)
    if gap_tol is None:
        gap_tol = default_gap_tol(path.total_mean_length)
    raw = spectrum_on_grid(graph, path, n_levels, tau_grid, gap_tol)
    tracked = raw[:, :n_levels].copy()
    if tau_grid.size > 1:
        ps = sample_path(path, tau_grid)
        rate = np.abs(ps.dL / ps.L).max(axis=1)
        rate = np.maximum(rate[1:], rate[:-1])
        dt = np.abs(np.diff(tau_grid))
        jump = np.abs(np.diff(tracked, axis=0))
        kmax = np.maximum(tracked[1:], tracked[:-1])
        # slack covers the rate varying within one step
        bound = 1.5 * kmax * (rate * dt)[:, None] + 10 * ROOT_TOL
        bad = np.argwhere(jump > bound)
        if bad.size:
            i, j = bad[0]
            raise TrackingLost(
                f"jump {jump[i, j]:.3g} exceeds continuity bound {bound[i, j]:.3g}",
                tau=float(tau_grid[i + 1]),
                level=int(j),
            )
    moments = None
    if with_moments:
        L_all = path.lengths(tau_grid)
        moments = np.stack(
            [level_moments_at(tracked[i], L_all[i], graph, float(t)) for i, t in enumerate(tau_grid)]
        )
    return [
        LevelCurve(
            level=n,
            tau_grid=tau_grid,
            k=tracked[:, n].copy(),
            moments=None if moments is None else moments[:, n, :].copy(),
        )
        for n in range(n_levels)
    ]
