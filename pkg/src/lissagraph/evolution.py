"""Time-dependent Schroedinger propagation on the fixed scaled graph.

The state is ``g_e(xi, tau)`` on ``xi in [-1/2, 1/2]``, evolved by
``(i/T) dg/dtau = -(1/L_e^2) g'' + W_e g`` with
``W_e = [L_e L_e'' xi^2 - (L_e'^2 + L_e L_e'')/4] / (4 T^2)`` and the scaled
vertex conditions (``L_e^{-1/2} g_e`` continuous, ``sum L_e^{-3/2} dg_e/dn = 0``).

Space: piecewise-linear elements with lumped mass, one shared unknown
``phi_v = L_e^{-1/2} g_e(end)`` per vertex, so the vertex conditions hold by
construction (continuity) and weakly (flux).  Working in mass-orthonormal
coordinates makes the generator Hermitian.  Time: Crank-Nicolson with the
generator frozen at the half step, which is exactly norm preserving.

The alternative ``"omega"`` picture evolves ``omega = exp(i beta (xi^2 - 1/4)) g``,
``beta = L L' / (4 T)``, under ``(1/L^2)[-(d - i xi A)^2 - xi^2 A^2]`` with
``A = 2 beta``, discretized with Peierls link phases.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.linalg import solve_banded
from scipy.interpolate import CubicSpline
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import eigsh, splu

from .errors import CFLWarning, ConfigError, NumericalError, WrongDimension
from .graph import LissajousPath, MetricGraph, sample_path, validate
from .spectral import LevelCurve, first_roots

DEFAULT_M = 256
DEFAULT_STEPS = 20000
MIN_STEPS = 1000
CFL_LIMIT = 0.5


class GridOperator:
    """Assembles the discrete generator for a fixed graph and resolution."""

    def __init__(self, graph: MetricGraph, M: int = DEFAULT_M):
        if M < 4:
            raise ConfigError("need at least 4 intervals per edge")
        self.graph = graph
        self.M = int(M)
        self.h = 1.0 / self.M
        self.xi = np.linspace(-0.5, 0.5, self.M + 1)
        E, V = graph.n_edges, graph.n_vertices
        n_int = self.M - 1
        self.n_vertex = V
        self.size = V + E * n_int
        vidx = graph.vertex_index
        # node index for every (edge, grid point); end points map to vertices
        nodes = np.empty((E, self.M + 1), dtype=np.int64)
        for e, edge in enumerate(graph.edges):
            nodes[e, 0] = vidx[edge.tail]
            nodes[e, -1] = vidx[edge.head]
            nodes[e, 1:-1] = V + e * n_int + np.arange(n_int)
        self.nodes = nodes
        self.is_end = np.zeros(self.M + 1, bool)
        self.is_end[[0, -1]] = True
        # link endpoints, shape (E, M)
        self._a = nodes[:, :-1]
        self._b = nodes[:, 1:]
        self._end_a = self.is_end[:-1]
        self._end_b = self.is_end[1:]
        self._int_nodes = nodes[:, 1:-1]

    # -- node weights ------------------------------------------------------

    def masses(self, L) -> np.ndarray:
        L = np.asarray(L, float)
        m = np.full(self.size, self.h)
        v = np.zeros(self.n_vertex)
        np.add.at(v, self.nodes[:, 0], 0.5 * self.h * L)
        np.add.at(v, self.nodes[:, -1], 0.5 * self.h * L)
        m[: self.n_vertex] = v
        return m

    def to_coords(self, g: np.ndarray, L) -> np.ndarray:
        """Edge values ``(E, M+1)`` -> orthonormal coordinates (vertex value from the first edge end)."""
        L = np.asarray(L, float)
        y = np.empty(self.size, dtype=complex)
        y[self._int_nodes] = g[:, 1:-1]
        y[self.nodes[:, 0]] = g[:, 0] / np.sqrt(L)
        y[self.nodes[:, -1]] = g[:, -1] / np.sqrt(L)
        return np.sqrt(self.masses(L)) * y

    def to_edges(self, u: np.ndarray, L) -> np.ndarray:
        """Orthonormal coordinates -> edge values ``g_e(xi_i)``, shape ``(E, M+1)``."""
        L = np.asarray(L, float)
        y = u / np.sqrt(self.masses(L))
        g = y[self.nodes].astype(complex)
        g[:, [0, -1]] *= np.sqrt(L)[:, None]
        return g

    def norm_sq(self, u) -> float:
        return float(np.vdot(u, u).real)

    # -- assembly ----------------------------------------------------------

    def _pattern(self):
        """Fixed CSC structure shared by every assembled matrix."""
        if getattr(self, "_csc", None) is None:
            a, b = self._a.ravel(), self._b.ravel()
            d = np.arange(self.size)
            rows = np.concatenate([a, b, a, b, d])
            cols = np.concatenate([a, b, b, a, d])
            uniq, inv = np.unique(cols * self.size + rows, return_inverse=True)
            r_u, c_u = uniq % self.size, uniq // self.size
            indptr = np.searchsorted(c_u, np.arange(self.size + 1))
            diagpos = np.nonzero(r_u == c_u)[0]
            self._csc = (inv.ravel(), r_u, c_u, indptr, diagpos, uniq.size)
        return self._csc

    def _values(self, L, link_phase=None, potential=None, robin=None) -> np.ndarray:
        L = np.asarray(L, float)
        E = L.size
        sq = np.sqrt(L)[:, None]
        c = np.broadcast_to((1.0 / (L**2 * self.h))[:, None], (E, self.M))
        sa = np.where(self._end_a, sq, 1.0)
        sb = np.where(self._end_b, sq, 1.0)
        off = -c * sa * sb
        if link_phase is not None:
            off = off * np.exp(-1j * link_phase)
        diag = np.zeros(self.size, dtype=complex)
        if potential is not None:
            w = np.full(self.M + 1, self.h)
            w[[0, -1]] *= 0.5
            wp = potential * w
            wp[:, [0, -1]] *= L[:, None]
            np.add.at(diag, self.nodes.ravel(), wp.ravel())
        if robin is not None:
            r = 1j * np.asarray(robin, float) / L
            np.add.at(diag, self.nodes[:, 0], r)
            np.add.at(diag, self.nodes[:, -1], r)
        w = np.concatenate([
            (c * sa**2).ravel(), (c * sb**2).ravel(), off.ravel(), np.conj(off).ravel(), diag
        ]).astype(complex)
        inv, _, _, _, _, n = self._pattern()
        return np.bincount(inv, w.real, n) + 1j * np.bincount(inv, w.imag, n)

    def _matrix(self, data) -> sp.csc_matrix:
        _, r_u, _, indptr, _, _ = self._pattern()
        return sp.csc_matrix((data, r_u, indptr), shape=(self.size, self.size))

    def stiffness(self, L, link_phase=None, potential=None, robin=None) -> sp.csc_matrix:
        """Form matrix ``K`` with ``y* K y = sum_e (1/L_e^2) int |D g|^2 + int V |g|^2 (+ robin)``.

        ``link_phase``: ``(E, M)`` Peierls phases; ``potential``: ``(E, M+1)`` nodal values;
        ``robin``: ``(E,)`` array; adds ``i robin_e / L_e`` on both end vertices of edge ``e``.
        """
        return self._matrix(self._values(L, link_phase, potential, robin))

    def hamiltonian(self, L, **kw) -> sp.csc_matrix:
        _, r_u, c_u, _, _, _ = self._pattern()
        dinv = 1.0 / np.sqrt(self.masses(L))
        return self._matrix(self._values(L, **kw) * dinv[r_u] * dinv[c_u])

    def cn_matrix(self, H: sp.csc_matrix, a: float) -> sp.csc_matrix:
        """``I + i a H`` on the shared pattern."""
        diagpos = self._pattern()[4]
        data = 1j * a * H.data
        data[diagpos] += 1.0
        return self._matrix(data)

    def _band(self):
        """Bandwidth-reducing permutation and banded-storage positions of the pattern."""
        if getattr(self, "_band_info", None) is None:
            _, r_u, c_u, indptr, _, _ = self._pattern()
            perm = reverse_cuthill_mckee(self._matrix(np.ones(r_u.size)).tocsr(), symmetric_mode=True)
            where = np.empty(self.size, dtype=np.int64)
            where[perm] = np.arange(self.size)
            pr, pc = where[r_u], where[c_u]
            bw = int(np.max(np.abs(pr - pc)))
            self._band_info = (perm, where, bw, bw + pr - pc, pc)
        return self._band_info

    def cn_solve(self, H: sp.csc_matrix, u: np.ndarray, a: float) -> np.ndarray:
        """Solve ``(I + i a H) x = (I - i a H) u`` in banded form."""
        perm, where, bw, brow, bcol = self._band()
        rhs = u - 1j * a * (H @ u)
        ab = np.zeros((2 * bw + 1, self.size), dtype=complex)
        ab[brow, bcol] = 1j * a * H.data
        ab[bw] += 1.0
        x = solve_banded((bw, bw), ab, rhs[perm], check_finite=False)
        return x[where]

    def spectral_hamiltonian(self, L) -> sp.csc_matrix:
        """Discrete instantaneous operator without the O(1/T^2) potential."""
        return self.hamiltonian(L)


def g_potential(xi, L, dL, ddL, T) -> np.ndarray:
    """``W_e(xi)`` for the g picture, shape ``(E, len(xi))``."""
    L, dL, ddL = (np.asarray(a, float)[:, None] for a in (L, dL, ddL))
    return (L * ddL * xi**2 - 0.25 * (dL**2 + L * ddL)) / (4.0 * T**2)


def omega_potential(xi, dL, T) -> np.ndarray:
    dL = np.asarray(dL, float)[:, None]
    return -(xi**2) * dL**2 / (4.0 * T**2)


def gauge_factor(xi, L, dL, T) -> np.ndarray:
    """``exp(i beta (xi^2 - 1/4))``, mapping g to omega; shape ``(E, len(xi))``."""
    beta = (np.asarray(L, float) * np.asarray(dL, float) / (4.0 * T))[:, None]
    return np.exp(1j * beta * (xi**2 - 0.25))


def peierls_phases(xi, L, dL, T) -> np.ndarray:
    A = (np.asarray(L, float) * np.asarray(dL, float) / (2.0 * T))[:, None]
    return 0.5 * A * (xi[1:] ** 2 - xi[:-1] ** 2)


def generator(op: GridOperator, path: LissajousPath, tau: float, T: float,
              picture: str = "g", boundary: str = "kirchhoff") -> sp.csc_matrix:
    """Hermitian (or, for ``boundary='neumann'``, non-Hermitian) generator at ``tau``."""
    ps = sample_path(path, tau)
    if picture == "g":
        V = g_potential(op.xi, ps.L, ps.dL, ps.ddL, T)
        kw = dict(potential=V)
    elif picture == "omega":
        kw = dict(
            potential=omega_potential(op.xi, ps.dL, T),
            link_phase=peierls_phases(op.xi, ps.L, ps.dL, T),
        )
    else:
        raise ConfigError(f"unknown picture {picture!r}")
    if boundary == "neumann":
        if picture != "g":
            raise ConfigError("the plain Neumann variant is implemented in the g picture")
        kw["robin"] = ps.L * ps.dL / (4.0 * T)
    elif boundary not in ("kirchhoff", "robin"):
        raise ConfigError(f"unknown boundary option {boundary!r}")
    return op.hamiltonian(ps.L, **kw)


def _cn_step(op: GridOperator, H: sp.csc_matrix, u: np.ndarray, a: float) -> np.ndarray:
    """``(I + i a H) u_new = (I - i a H) u``."""
    if op.n_vertex + op.graph.n_edges <= 64:
        return op.cn_solve(H, u, a)
    lu = splu(op.cn_matrix(H, a))
    return lu.solve(u - 1j * a * (H @ u))


# --- discrete eigenstates ------------------------------------------------------


def discrete_level(op: GridOperator, L, n: int, k_guess: float | None = None,
                   graph: MetricGraph | None = None) -> tuple[float, np.ndarray]:
    """Discrete eigenpair of level ``n`` (``n = 0`` ground) in orthonormal coordinates.

    Eigenvectors are real with the largest-magnitude component positive.
    """
    H = op.spectral_hamiltonian(L).real.tocsc()
    graph = graph or op.graph
    if k_guess is None:
        k_guess = 0.0 if n == 0 else float(first_roots(L, graph, n)[n - 1])
    target = k_guess**2
    ncv_k = min(3, op.size - 2)
    vals, vecs = eigsh(H, k=ncv_k, sigma=target - 1e-3 * max(target, 1.0), which="LM")
    i = int(np.argmin(np.abs(vals - target)))
    lam, v = float(vals[i]), vecs[:, i]
    if abs(lam - target) > 1e-2 * max(target, 1.0):
        raise NumericalError(
            f"discrete level {n} ({lam:.6g}) is far from the continuum value {target:.6g}",
            level=n,
        )
    v = v / np.linalg.norm(v)
    j = int(np.argmax(np.abs(v)))
    if v[j] < 0:
        v = -v
    return lam, v.astype(complex)


def discrete_level_curve(op: GridOperator, path: LissajousPath, n: int, n_nodes: int = 129):
    """``(tau, lambda^h)`` on a uniform periodic grid for level ``n``."""
    tau = np.linspace(0.0, 1.0, n_nodes)
    L_all = path.lengths(tau)
    lam = np.empty(n_nodes)
    for i, L in enumerate(L_all[:-1]):
        lam[i] = discrete_level(op, L, n)[0]
    lam[-1] = lam[0]
    return tau, lam


def cn_dynamical_phase(tau_nodes, lam_nodes, T: float, steps: int) -> float:
    """Phase a Crank-Nicolson step accumulates on an instantaneous eigenvector.

    Each step contributes ``2 arctan(lambda T dtau / 2)`` with ``lambda`` at the half step.
    """
    spline = CubicSpline(tau_nodes, lam_nodes, bc_type="periodic")
    dt = 1.0 / steps
    mid = (np.arange(steps) + 0.5) * dt
    return float(np.sum(2.0 * np.arctan(0.5 * spline(mid) * T * dt)))


def dynamical_phase(level_curve: LevelCurve, T: float) -> float:
    """``T int_0^1 k_n(tau)^2 dtau`` by Simpson's rule on the curve's grid."""
    return float(T * simpson(np.asarray(level_curve.k) ** 2, x=level_curve.tau_grid))


# --- propagation ---------------------------------------------------------------


@dataclass
class EvolutionState:
    g: np.ndarray
    tau: float
    T: float
    norm_sq: float
    accumulated_total_phase: float
    picture: str = "g"


@dataclass
class EvolutionResult:
    state: EvolutionState
    tau: np.ndarray
    norm_sq: np.ndarray
    overlap_abs: np.ndarray
    phase: np.ndarray
    norm_drift: float
    total_phase: float
    dynamical_phase: float
    initial_level: float
    options: dict = field(default_factory=dict)

    @property
    def residual_phase(self) -> float:
        """``-(arg<g0|g(1)> + dynamical phase)``; tends to zero as ``1/T``."""
        return -(self.total_phase + self.dynamical_phase)


def _check_steps(steps: int):
    if steps < MIN_STEPS:
        raise ConfigError(f"need at least {MIN_STEPS} time steps")


def evolve(
    graph: MetricGraph,
    path: LissajousPath,
    n: int = 1,
    T: float | None = None,
    M: int = DEFAULT_M,
    steps: int = DEFAULT_STEPS,
    picture: str = "g",
    boundary: str = "kirchhoff",
    record: int = 100,
    track_overlap: bool = True,
    dyn_nodes: int = 129,
) -> EvolutionResult:
    """Propagate the discrete level-``n`` eigenstate over one cycle.

    ``T`` defaults to ``path.T``.  The returned ``total_phase`` is the
    principal argument of ``<g(0)|g(1)>``; ``dynamical_phase`` is the phase a
    stationary eigenvector would pick up under the same scheme (see
    :func:`cn_dynamical_phase`) and is not reduced mod ``2 pi``.
    """
    validate(graph, path)
    T = float(path.T if T is None else T)
    if T <= 0:
        raise ConfigError("T must be positive")
    _check_steps(steps)
    op = GridOperator(graph, M)
    L0 = path.lengths(0.0)
    lam0, v0 = discrete_level(op, L0, n)
    dt = 1.0 / steps
    if dt * abs(lam0) * T > CFL_LIMIT:
        warnings.warn(
            f"dtau * lambda * T = {dt * lam0 * T:.3g} exceeds {CFL_LIMIT}; phase accuracy degrades",
            CFLWarning,
            stacklevel=2,
        )
    ps0 = sample_path(path, 0.0)
    if picture == "omega":
        U0 = op.to_coords(gauge_factor(op.xi, ps0.L, ps0.dL, T) * op.to_edges(v0, L0), L0)
        u = U0.copy()
        u_init = U0
    else:
        u = v0.copy()
        u_init = v0
    record = max(1, min(record, steps))
    rec_steps = np.unique(np.linspace(0, steps, record + 1).round().astype(int))
    rec_tau, rec_norm, rec_ov, rec_ph = [], [], [], []
    prev_vec = v0.real
    a = 0.5 * T * dt

    def observe(step, u):
        nonlocal prev_vec
        t = step * dt
        rec_tau.append(t)
        rec_norm.append(op.norm_sq(u))
        if not track_overlap:
            rec_ov.append(np.nan)
            rec_ph.append(np.angle(np.vdot(u_init, u)))
            return
        L = path.lengths(t)
        ug = u
        if picture == "omega":
            ps = sample_path(path, t)
            ug = op.to_coords(op.to_edges(u, L) / gauge_factor(op.xi, ps.L, ps.dL, T), L)
        _, v = discrete_level(op, L, n)
        v = v.real
        if np.dot(v, prev_vec) < 0:
            v = -v
        prev_vec = v
        ov = np.vdot(v, ug)
        rec_ov.append(abs(ov))
        rec_ph.append(np.angle(ov))

    observe(0, u)
    for s in range(steps):
        H = generator(op, path, (s + 0.5) * dt, T, picture, boundary)
        u = _cn_step(op, H, u, a)
        if s + 1 in rec_steps:
            observe(s + 1, u)
    total = float(np.angle(np.vdot(u_init, u)))
    t_nodes, lam_nodes = discrete_level_curve(op, path, n, dyn_nodes)
    dyn = cn_dynamical_phase(t_nodes, lam_nodes, T, steps)
    L1 = path.lengths(1.0)
    state = EvolutionState(
        g=op.to_edges(u, L1),
        tau=1.0,
        T=T,
        norm_sq=op.norm_sq(u),
        accumulated_total_phase=total,
        picture=picture,
    )
    rec_norm = np.asarray(rec_norm)
    return EvolutionResult(
        state=state,
        tau=np.asarray(rec_tau),
        norm_sq=rec_norm,
        overlap_abs=np.asarray(rec_ov),
        phase=np.unwrap(np.asarray(rec_ph)),
        norm_drift=float(np.max(np.abs(rec_norm - rec_norm[0]))),
        total_phase=total,
        dynamical_phase=dyn,
        initial_level=lam0,
        options=dict(n=n, T=T, M=M, steps=steps, picture=picture, boundary=boundary),
    )


def wrap_phase(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


# --- Neumann flux defect -----------------------------------------------------


@dataclass
class FluxSeries:
    tau: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray
    norm_sq: np.ndarray

    @property
    def max_relative_error(self) -> float:
        scale = np.max(np.abs(self.predicted))
        if scale == 0:
            return float(np.max(np.abs(self.measured)))
        return float(np.max(np.abs(self.measured - self.predicted)) / scale)

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.norm_sq - self.norm_sq[0])))


def neumann_flux_defect(
    path: LissajousPath,
    T: float | None = None,
    M: int = 512,
    steps: int = DEFAULT_STEPS,
    boundary: str = "neumann",
    n: int = 1,
) -> FluxSeries:
    """Norm change of a moving interval under plain Neumann (or the modified Robin) condition.

    ``measured`` is the finite-difference rate of ``||g||^2`` over each step;
    ``predicted`` is ``(L'/(2L)) (|g(1/2)|^2 + |g(-1/2)|^2)`` (both ends move
    at ``L'/2``) evaluated on the time-centred state.
    """
    if path.n_edges != 1:
        raise WrongDimension("flux defect is defined on a single interval")
    graph = MetricGraph.interval()
    validate(graph, path)
    _check_steps(steps)
    T = float(path.T if T is None else T)
    op = GridOperator(graph, M)
    _, u = discrete_level(op, path.lengths(0.0), n)
    dt = 1.0 / steps
    a = 0.5 * T * dt
    norms = np.empty(steps + 1)
    norms[0] = op.norm_sq(u)
    pred = np.empty(steps)
    for s in range(steps):
        tm = (s + 0.5) * dt
        H = generator(op, path, tm, T, "g", boundary)
        u_new = _cn_step(op, H, u, a)
        ps = sample_path(path, tm)
        g = op.to_edges(0.5 * (u + u_new), ps.L)
        ends = abs(g[0, 0]) ** 2 + abs(g[0, -1]) ** 2
        pred[s] = 0.5 * ps.dL[0] / ps.L[0] * ends
        norms[s + 1] = op.norm_sq(u_new)
        u = u_new
    if boundary == "robin":
        pred[:] = 0.0
    measured = np.diff(norms) / dt
    return FluxSeries(tau=(np.arange(steps) + 0.5) * dt, measured=measured,
                      predicted=pred, norm_sq=norms)


# --- consistency checks --------------------------------------------------------


def gauge_consistency(graph, path, n=1, T=None, M=64, steps=4000) -> float:
    """Max difference between the omega-picture state and the gauged g-picture state at ``tau = 1``."""
    rg = evolve(graph, path, n, T, M, steps, picture="g", track_overlap=False, record=1)
    rw = evolve(graph, path, n, T, M, steps, picture="omega", track_overlap=False, record=1)
    ps = sample_path(path, 1.0)
    omega_from_g = gauge_factor(np.linspace(-0.5, 0.5, M + 1), ps.L, ps.dL, rg.state.T) * rg.state.g
    return float(np.max(np.abs(omega_from_g - rw.state.g)))


def reconstruct_psi(g: np.ndarray, L, dL, T) -> np.ndarray:
    """``psi_e = L_e^{-1/2} omega_e`` on the edge grid (``x = L_e xi``)."""
    M = g.shape[1] - 1
    xi = np.linspace(-0.5, 0.5, M + 1)
    return gauge_factor(xi, L, dL, T) * g / np.sqrt(np.asarray(L, float))[:, None]


def _inward_derivative(f: np.ndarray, h: float, end: int) -> np.ndarray:
    if end == 0:
        return (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * h)
    return (-3 * f[:, -1] + 4 * f[:, -2] - f[:, -3]) / (2 * h)


def magnetic_vertex_residuals(graph: MetricGraph, psi: np.ndarray, L, dL, T) -> dict:
    """Residuals of the moving-edge vertex conditions for a reconstructed ``psi``.

    Continuity is checked as the spread of end values; the current condition
    is ``sum (dpsi/dn_in + i L_e'/(4T) psi) = 0``, reported relative to
    ``sum |dpsi/dn_in|``.
    """
    L = np.asarray(L, float)
    dL = np.asarray(dL, float)
    M = psi.shape[1] - 1
    hx = L / M
    d_in = {0: _inward_derivative(psi, 1.0, 0) / hx, 1: _inward_derivative(psi, 1.0, 1) / hx}
    cont, curr, scale = 0.0, 0.0, 0.0
    for v, ends in graph.edge_ends().items():
        vals = np.array([psi[e, 0 if end == 0 else -1] for e, end in ends])
        cont = max(cont, float(np.max(np.abs(vals - vals[0]))))
        J = sum(d_in[end][e] + 1j * dL[e] / (4 * T) * psi[e, 0 if end == 0 else -1] for e, end in ends)
        s = sum(abs(d_in[end][e]) for e, end in ends)
        curr = max(curr, abs(J))
        scale = max(scale, s)
    return {"continuity": cont, "current": curr, "current_scale": scale}


# --- adiabatic convergence -------------------------------------------------------


@dataclass
class ConvergenceRow:
    T: float
    residual_phase: float
    predicted: float
    norm_drift: float
    final_overlap: float

    @property
    def phase_error(self) -> float:
        return abs(self.residual_phase - self.predicted)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("LISSAGRAPH_WORKERS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("LISSAGRAPH_WORKERS must be an integer") from None


def _convergence_point(args):
    graph, path, n, T, M, steps, gamma = args
    r = evolve(graph, path, n, T, M, steps, record=1, track_overlap=True)
    return ConvergenceRow(
        T=float(T),
        residual_phase=float(wrap_phase(r.residual_phase)),
        predicted=gamma / T,
        norm_drift=r.norm_drift,
        final_overlap=float(r.overlap_abs[-1]),
    )


def convergence_study(graph, path, n, T_values, gamma, M=DEFAULT_M, steps_per_T=100,
                      min_steps=DEFAULT_STEPS, workers=None) -> list[ConvergenceRow]:
    """Residual phase against ``gamma / T`` for each ``T`` (``gamma`` from the phase engine).

    Step counts are ``max(min_steps, steps_per_T * T)`` so ``T dtau`` does not grow.
    """
    jobs = [
        (graph, path, n, float(T), M, int(max(min_steps, math.ceil(steps_per_T * T))), float(gamma))
        for T in T_values
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_convergence_point, jobs))
    return [_convergence_point(j) for j in jobs]
