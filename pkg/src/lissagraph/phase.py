"""Adiabatic geometric phase of graph eigenstates along Lissajous cycles.

Phases are reported in the scaled convention
``Gamma^(n) = (1/8) sum_e int_0^1 d^2(L_e^2)/dtau^2 <xi_e^2 - 1/4>^(n)_tau dtau``,
which is independent of ``T`` in the adiabatic limit.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .errors import InsufficientSamples, NoIntegerFit, WrongDimension
from .graph import LissajousPath, MetricGraph, sample_path
from .spectral import default_gap_tol, level_moments_at, spectrum_on_grid

DEFAULT_NODES = 4096


def tau_grid(n_intervals: int = DEFAULT_NODES) -> np.ndarray:
    """Uniform grid on ``[0, 1]`` with an even number of Simpson panels."""
    if n_intervals < 2 or n_intervals % 2:
        raise ValueError("need an even number (>= 2) of intervals")
    return np.linspace(0.0, 1.0, n_intervals + 1)


@dataclass(frozen=True)
class PhaseTrace:
    level: int
    tau_grid: np.ndarray
    accumulated: np.ndarray
    error_estimate: float = 0.0

    @property
    def total(self) -> float:
        return float(self.accumulated[-1])


def _integrate(integrand: np.ndarray, grid: np.ndarray, level: int) -> PhaseTrace:
    acc = np.concatenate([[0.0], cumulative_simpson(integrand, x=grid)])
    total = simpson(integrand, x=grid)
    acc[-1] = total
    err = 0.0
    if (grid.size - 1) % 4 == 0:
        err = abs(total - simpson(integrand[::2], x=grid[::2]))
    return PhaseTrace(level=level, tau_grid=grid, accumulated=acc, error_estimate=float(err))


def _resolve_grid(grid) -> np.ndarray:
    if grid is None:
        return tau_grid()
    grid = np.asarray(grid, float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("tau grid must be a 1-d array with at least 3 nodes")
    if abs(grid[0]) > 0 or abs(grid[-1] - 1.0) > 0:
        raise ValueError("tau grid must start at 0 and end at 1")
    return grid


def phase_integrand(ddL2: np.ndarray, moments: np.ndarray) -> np.ndarray:
    return 0.125 * np.sum(ddL2 * moments, axis=-1)


def geometric_phases(
    levels: Iterable[int],
    graph: MetricGraph,
    path: LissajousPath,
    grid=None,
    gap_tol: float | None = None,
    workers: int = 1,
) -> dict[int, PhaseTrace]:
    """Phase traces for several levels sharing one spectral solve per node.

    ``workers > 1`` splits the tau nodes over a process pool; results do not
    depend on the split.
    """
    levels = sorted(set(int(n) for n in levels))
    if not levels or levels[0] < 0:
        raise ValueError("levels must be non-negative integers")
    grid = _resolve_grid(grid)
    if np.all(path.rho == 0):
        zero = {n: PhaseTrace(n, grid, np.zeros_like(grid)) for n in levels}
        return zero
    if gap_tol is None:
        gap_tol = default_gap_tol(path.total_mean_length)
    chunks = np.array_split(np.arange(grid.size), max(1, workers))
    jobs = [(levels, graph, path, grid[c], gap_tol) for c in chunks if c.size]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_integrand_chunk, jobs))
    else:
        parts = [_integrand_chunk(j) for j in jobs]
    integrands = np.concatenate(parts, axis=0)
    return {n: _integrate(integrands[:, j], grid, n) for j, n in enumerate(levels)}


def _integrand_chunk(args) -> np.ndarray:
    levels, graph, path, grid, gap_tol = args
    ps = sample_path(path, grid)
    ks = spectrum_on_grid(graph, path, levels[-1] + 1, grid, gap_tol, extra=1)[:, levels]
    out = np.empty((grid.size, len(levels)))
    for i, t in enumerate(grid):
        m = level_moments_at(ks[i], ps.L[i], graph, float(t))
        out[i] = phase_integrand(ps.ddL2[i], m)
    return out


def geometric_phase(n: int, graph: MetricGraph, path: LissajousPath, grid=None, gap_tol=None) -> PhaseTrace:
    """Accumulated ``Gamma(tau)`` and cycle total for level ``n`` (``n = 0`` is ``k = 0``)."""
    return geometric_phases([n], graph, path, grid, gap_tol)[n]


def ground_phase(graph: MetricGraph | None, path: LissajousPath, grid=None) -> PhaseTrace:
    """``-(1/48) sum_e int (L_e / sum L) d^2(L_e^2)/dtau^2 dtau``; no spectral solve."""
    grid = _resolve_grid(grid)
    ps = sample_path(path, grid)
    w = ps.L / ps.L.sum(axis=-1, keepdims=True)
    integrand = -np.sum(w * ps.ddL2, axis=-1) / 48.0
    return _integrate(integrand, grid, 0)


def leading_order_ground(path: LissajousPath) -> float:
    """Second-order small-amplitude ground phase ``pi^2/(12 Lbar^2) sum nu^2 Lbar_e (Lbar - Lbar_e) rho^2``."""
    Lb = path.Lbar
    total = Lb.sum()
    return float(
        math.pi**2 / (12 * total**2) * np.sum(path.nu**2 * Lb * (total - Lb) * path.rho**2)
    )


def third_order_ground(path: LissajousPath) -> float:
    """Cubic ground-phase term for frequency triples with ``nu_i + nu_j = nu_k``.

    Sums cyclic relabelings ``(i, j, k)`` of ``(1, 2, 3)``; all indices in the
    bracket follow the relabeling.  Zero unless some ``nu_i + nu_j = nu_k``.
    """
    if path.n_edges != 3:
        raise WrongDimension("third-order term is defined for three edges")
    Lb, nu, rho, al = path.Lbar, path.nu, path.rho, path.alpha
    total = Lb.sum()
    out = 0.0
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        if nu[i] + nu[j] != nu[k]:
            continue
        bracket = Lb[i] ** 2 * nu[i] ** 2 + Lb[j] ** 2 * nu[j] ** 2 + Lb[k] ** 2 * (nu[i] + nu[j]) ** 2
        out += (
            math.pi**2 * rho[0] * rho[1] * rho[2] * bracket / (12 * total**3)
            * math.cos(al[i] + al[j] - al[k])
        )
    return float(out)


# --- selection rule ---------------------------------------------------------


@dataclass(frozen=True)
class OrderTuple:
    q: tuple[int, ...]
    j: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.q)

    def to_dict(self) -> dict:
        return {"q": list(self.q), "j": list(self.j), "order": self.order}


def allowed_orders(nu: Sequence[int], q_max: int, q_min: int = 2) -> list[OrderTuple]:
    """All exponent tuples ``q`` whose cosine product survives the tau average.

    ``q`` is admissible when some ``0 <= j_e <= q_e`` satisfies
    ``2 sum nu_e j_e = sum nu_e q_e``.  The witness is the first such ``j`` in
    descending lexicographic order, so of the pair ``j``, ``q - j`` the larger
    one is kept.
    """
    nu = tuple(int(v) for v in nu)
    if q_max > 20:
        raise ValueError("q_max is limited to 20")
    out = []
    for order in range(q_min, q_max + 1):
        for q in _compositions(order, len(nu)):
            target = sum(n * qe for n, qe in zip(nu, q))
            if target % 2:
                continue
            for j in itertools.product(*(range(qe, -1, -1) for qe in q)):
                if 2 * sum(n * je for n, je in zip(nu, j)) == target:
                    out.append(OrderTuple(q=q, j=j))
                    break
    return out


def _compositions(total: int, parts: int):
    """Weak compositions of ``total`` into ``parts`` ordered lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def min_mixed_order(nu: Sequence[int], q_max: int = 20) -> int | None:
    """Smallest admissible order whose ``q`` involves every edge."""
    for t in allowed_orders(nu, q_max):
        if all(qe > 0 for qe in t.q):
            return t.order
    return None


# --- small-amplitude fits ---------------------------------------------------


def richardson_rho2(f_rho0: float, f_half: float) -> float:
    """Extrapolate ``f(rho) = c + d rho^2 + ...`` to ``rho = 0`` from ``rho0`` and ``rho0/2``."""
    return (4.0 * f_half - f_rho0) / 3.0


def richardson_rho(f_rho0: float, f_half: float) -> float:
    """Extrapolate ``f(rho) = c + d rho + ...`` to ``rho = 0``."""
    return 2.0 * f_half - f_rho0


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.log(np.asarray(x, float))
    y = np.log(np.abs(np.asarray(y, float)))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class FrequencyFit:
    nu: tuple[int, ...]
    residuals: tuple[float, ...]
    fit_coefficients: tuple[float, ...]
    nu_real: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "nu": list(self.nu),
            "residuals": list(self.residuals),
            "fit_coefficients": list(self.fit_coefficients),
            "nu_estimate": list(self.nu_real),
        }


def unit_direction_samples(path: LissajousPath, rhos: Sequence[float], graph=None) -> list:
    """``(rho vector, Gamma^(0))`` with one active edge at a time."""
    samples = []
    for e in range(path.n_edges):
        for r in rhos:
            rho = np.zeros(path.n_edges)
            rho[e] = r
            samples.append((rho, ground_phase(graph, path.replace(rho=rho)).total))
    return samples


def recover_frequencies(
    phase_samples: Sequence[tuple[Sequence[float], float]],
    Lbar: Sequence[float],
    nu_max: int,
    rel_tol: float = 1e-2,
) -> FrequencyFit:
    """Infer integer frequencies from small-amplitude ground phases.

    ``phase_samples`` holds ``(rho vector, Gamma)`` pairs.  Each edge needs a
    single-edge sample; with two or more, the two smallest amplitudes are
    Richardson-extrapolated in ``rho^2`` to get ``c_e = lim Gamma / rho_e^2``,
    then ``nu_e^2 = 12 Lbar^2 c_e / (pi^2 Lbar_e (Lbar - Lbar_e))``.
    """
    Lb = np.asarray(Lbar, float)
    total = Lb.sum()
    per_edge: dict[int, list[tuple[float, float]]] = {e: [] for e in range(Lb.size)}
    for rho, gamma in phase_samples:
        rho = np.asarray(rho, float)
        active = np.nonzero(rho)[0]
        if active.size == 1:
            e = int(active[0])
            per_edge[e].append((float(rho[e]), float(gamma)))
    coeffs, estimates, residuals, ints = [], [], [], []
    for e in range(Lb.size):
        pts = sorted(set(per_edge[e]))
        if not pts:
            raise InsufficientSamples(f"edge {e + 1} has no single-edge sample")
        r_small, g_small = pts[0]
        f_small = g_small / r_small**2
        if len(pts) == 1 or pts[1][0] == r_small:
            # no extrapolation possible; biased by O(rho^2)
            c = f_small
        else:
            r_big, g_big = pts[1]
            f_big = g_big / r_big**2
            if math.isclose(r_big, 2 * r_small, rel_tol=1e-12):
                c = richardson_rho2(f_big, f_small)
            else:
                # general two-point extrapolation in rho^2
                c = (f_small * r_big**2 - f_big * r_small**2) / (r_big**2 - r_small**2)
        weight = Lb[e] * (total - Lb[e])
        if weight <= 0:
            raise InsufficientSamples("a single-edge graph carries no frequency information")
        nu2 = 12 * total**2 * c / (math.pi**2 * weight)
        est = math.sqrt(max(nu2, 0.0))
        n_int = int(round(est))
        res = abs(est - n_int) / max(n_int, 1)
        coeffs.append(float(c))
        estimates.append(est)
        residuals.append(float(res))
        ints.append(n_int)
        if n_int < 1 or n_int > nu_max or res > rel_tol:
            raise NoIntegerFit(
                f"edge {e + 1}: estimate {est:.6g} has no integer within tolerance "
                f"(residual {res:.3g})"
            )
    return FrequencyFit(tuple(ints), tuple(residuals), tuple(coeffs), tuple(estimates))


def third_order_coefficient(path: LissajousPath, rho0: float = 1e-3, grid=None) -> float:
    """Extrapolated ``lim (Gamma^(0) - leading) / rho^3`` for the amplitude pattern ``path.rho``.

    ``path.rho`` sets the direction; amplitudes ``rho0 * rho`` and ``rho0/2 * rho`` are used.
    """
    vals = []
    for r in (rho0, rho0 / 2):
        p = path.replace(rho=path.rho * r)
        vals.append((ground_phase(None, p, grid).total - leading_order_ground(p)) / r**3)
    return richardson_rho(vals[0], vals[1])


@dataclass(frozen=True)
class SweepRow:
    rho: float
    gamma: float
    leading: float

    @property
    def delta(self) -> float:
        return self.gamma - self.leading


def rho_sweep(path: LissajousPath, rhos: Sequence[float], grid=None) -> list[SweepRow]:
    """Ground phase at equal amplitudes ``rho`` on every edge."""
    rows = []
    for r in rhos:
        p = path.replace(rho=np.full(path.n_edges, float(r)))
        rows.append(SweepRow(float(r), ground_phase(None, p, grid).total, leading_order_ground(p)))
    return rows


def alpha_sweep(path: LissajousPath, phis: Sequence[float], grid=None) -> list[tuple[float, float]]:
    """``(phi, Gamma/rho^2)`` with ``alpha = (0, alpha_2, alpha_2 + phi)``; uses ``path.rho[0]`` as rho."""
    rho = float(path.rho[0])
    out = []
    for phi in phis:
        alpha = np.array(path.alpha, float)
        alpha[0] = 0.0
        alpha[2] = alpha[1] + phi
        p = path.replace(alpha=alpha)
        out.append((float(phi), ground_phase(None, p, grid).total / rho**2))
    return out
