"""Metric graphs whose edge lengths trace closed Lissajous curves.

Each edge ``e`` has length ``L_e(tau) = Lbar_e + rho_e cos(2 pi nu_e tau + alpha_e)``
for ``tau`` in ``[0, 1]``.  All quantities are dimensionless.  Edges carry a
scaled coordinate ``xi`` in ``[-1/2, 1/2]`` running from the edge's ``tail``
vertex (``xi = -1/2``) to its ``head`` vertex (``xi = +1/2``).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    IndexingError,
    LoopEdge,
    NonPositiveLength,
    NotCoprime,
    WrongDimension,
)

TWO_PI = 2.0 * math.pi


class Edge(NamedTuple):
    id: object
    tail: object
    head: object


@dataclass(frozen=True)
class MetricGraph:
    """Finite connected graph; multi-edges are allowed, self-loops are not."""

    vertices: tuple
    edges: tuple[Edge, ...]

    def __post_init__(self):
        vertices = tuple(self.vertices)
        edges = tuple(Edge(*e) for e in self.edges)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        if not vertices or not edges:
            raise DisconnectedGraph("graph needs at least one vertex and one edge")
        if len(set(vertices)) != len(vertices):
            raise IndexingError("duplicate vertex ids")
        if len({e.id for e in edges}) != len(edges):
            raise IndexingError("duplicate edge ids")
        known = set(vertices)
        for e in edges:
            if e.tail not in known or e.head not in known:
                raise IndexingError(f"edge {e.id!r} references an unknown vertex")
            if e.tail == e.head:
                raise LoopEdge(f"edge {e.id!r} is a self-loop")
        if not self._connected():
            raise DisconnectedGraph("graph is not connected")

    def _connected(self) -> bool:
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            adj[e.tail].add(e.head)
            adj[e.head].add(e.tail)
        seen = {self.vertices[0]}
        queue = deque(seen)
        while queue:
            for w in adj[queue.popleft()]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def vertex_index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    @property
    def star_map(self) -> dict:
        """Vertex id -> tuple of incident edge indices (S_v)."""
        out = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            out[e.tail].append(i)
            out[e.head].append(i)
        return {v: tuple(s) for v, s in out.items()}

    @property
    def degree(self) -> dict:
        return {v: len(s) for v, s in self.star_map.items()}

    def edge_ends(self) -> dict:
        """Vertex id -> list of ``(edge index, end)``; end 0 is ``xi=-1/2``, 1 is ``xi=+1/2``."""
        out = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            out[e.tail].append((i, 0))
            out[e.head].append((i, 1))
        return out

    def star_center(self):
        """Return the central vertex if the graph is a star with pendant leaves, else None.

        A single edge counts as a one-edge star centred at its tail.
        """
        deg = self.degree
        if self.n_edges == 1:
            return self.edges[0].tail
        candidates = [v for v, d in deg.items() if d == self.n_edges]
        for c in candidates:
            leaves = [e.head if e.tail == c else e.tail for e in self.edges]
            if all(c in (e.tail, e.head) for e in self.edges) and all(
                deg[v] == 1 for v in leaves
            ):
                return c
        return None

    @classmethod
    def star(cls, n_edges: int = 3) -> "MetricGraph":
        """Star with centre ``0`` and leaves ``1..n_edges``; edges point outward."""
        return cls(
            tuple(range(n_edges + 1)),
            tuple(Edge(i + 1, 0, i + 1) for i in range(n_edges)),
        )

    @classmethod
    def interval(cls) -> "MetricGraph":
        return cls((0, 1), (Edge(1, 0, 1),))

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "from": e.tail, "to": e.head} for e in self.edges],
        }


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LissajousPath:
    """Per-edge Lissajous parameters plus the adiabatic time scale ``T``."""

    Lbar: np.ndarray
    rho: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    T: float = 1.0

    def __post_init__(self):
        Lbar = _frozen(self.Lbar)
        n = Lbar.size
        rho = _frozen(np.broadcast_to(np.asarray(self.rho, float), (n,)))
        alpha = _frozen(np.broadcast_to(np.asarray(self.alpha, float), (n,)))
        nu_raw = np.broadcast_to(np.asarray(self.nu), (n,))
        if not np.all(np.asarray(nu_raw, float) == np.round(np.asarray(nu_raw, float))):
            raise NotCoprime("frequencies must be integers")
        nu = _frozen(np.asarray(nu_raw, float).astype(np.int64), dtype=np.int64)
        object.__setattr__(self, "Lbar", Lbar)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", float(self.T))

    @property
    def n_edges(self) -> int:
        return self.Lbar.size

    @property
    def total_mean_length(self) -> float:
        return float(self.Lbar.sum())

    def replace(self, **changes) -> "LissajousPath":
        fields = dict(Lbar=self.Lbar, rho=self.rho, nu=self.nu, alpha=self.alpha, T=self.T)
        fields.update(changes)
        return LissajousPath(**fields)

    def canonical(self) -> "LissajousPath":
        """Shift the time origin so that ``alpha_1 = 0``.

        The traced curve is unchanged; only the starting point moves.
        """
        shift = self.alpha[0] / self.nu[0]
        alpha = np.mod(self.alpha - self.nu * shift, TWO_PI)
        alpha[0] = 0.0
        return self.replace(alpha=alpha)

    def permuted(self, order: Sequence[int]) -> "LissajousPath":
        order = list(order)
        return self.replace(
            Lbar=self.Lbar[order], rho=self.rho[order], nu=self.nu[order], alpha=self.alpha[order]
        )

    def lengths(self, tau) -> np.ndarray:
        """``L_e(tau)``; shape ``(..., E)`` for array ``tau``."""
        phase = TWO_PI * np.multiply.outer(tau, self.nu) + self.alpha
        return self.Lbar + self.rho * np.cos(phase)

    def to_dict(self) -> dict:
        return {
            "Lbar": self.Lbar.tolist(),
            "rho": self.rho.tolist(),
            "nu": self.nu.tolist(),
            "alpha": self.alpha.tolist(),
            "T": self.T,
        }


@dataclass(frozen=True)
class PathSample:
    tau: float | np.ndarray
    L: np.ndarray
    dL: np.ndarray
    ddL: np.ndarray
    ddL2: np.ndarray = field(repr=False)


def validate(graph: MetricGraph, path: LissajousPath) -> None:
    """Raise a :class:`~lissagraph.errors.ConfigError` subclass if the pair is unusable."""
    if path.n_edges != graph.n_edges:
        raise WrongDimension(
            f"path has {path.n_edges} edges but the graph has {graph.n_edges}"
        )
    if np.any(path.Lbar <= 0):
        raise NonPositiveLength("mean lengths must be positive")
    if np.any(path.rho < 0) or np.any(path.rho >= path.Lbar):
        raise NonPositiveLength("need 0 <= rho_e < Lbar_e on every edge")
    if np.any(path.nu < 1):
        raise NotCoprime("frequencies must be positive integers")
    if path.T <= 0:
        raise NonPositiveLength("adiabatic scale T must be positive")
    active = [int(v) for v, r in zip(path.nu, path.rho) if r > 0]
    if active and reduce(math.gcd, active) != 1:
        raise NotCoprime(f"active frequencies {active} share a common factor")


def sample_path(path: LissajousPath, tau) -> PathSample:
    """Closed-form lengths and derivatives at ``tau`` (scalar or array)."""
    tau_arr = np.asarray(tau, dtype=float)
    w = TWO_PI * path.nu
    phase = np.multiply.outer(tau_arr, w) + path.alpha
    c, s = np.cos(phase), np.sin(phase)
    L = path.Lbar + path.rho * c
    dL = -w * path.rho * s
    ddL = -(w**2) * path.rho * c
    ddL2 = 2.0 * (L * ddL + dL * dL)
    return PathSample(tau=tau, L=L, dL=dL, ddL=ddL, ddL2=ddL2)


def knot_polyline(path: LissajousPath, n_samples: int) -> np.ndarray:
    """Points ``(L_1, L_2, L_3)(tau)`` on ``n_samples`` uniform nodes of ``[0, 1]``."""
    if path.n_edges != 3:
        raise WrongDimension("knot polyline needs exactly three edges")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    tau = np.linspace(0.0, 1.0, n_samples)
    pts = path.lengths(tau)
    pts[-1] = pts[0]  # period is exactly 1 for integer frequencies
    return pts
