"""JSON run configuration: graph, Lissajous path and per-command options."""
from __future__ import annotations

import ast
import json
import math
import operator
from pathlib import Path

from .errors import ConfigError
from .graph import Edge, LissajousPath, MetricGraph, validate

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def parse_number(value) -> float:
    """Numbers or arithmetic strings in ``pi`` such as ``"9*pi/11"``."""
    if isinstance(value, bool):
        raise ConfigError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"not a number: {value!r}")
    try:
        tree = ast.parse(value.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"cannot parse {value!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {value!r}")

    try:
        return float(ev(tree))
    except (ZeroDivisionError, OverflowError):
        raise ConfigError(f"cannot evaluate {value!r}") from None


def parse_list(text: str, cast=parse_number) -> list:
    """Comma separated values (CLI flags)."""
    items = [t for t in str(text).split(",") if t.strip()]
    if not items:
        raise ConfigError("empty list")
    return [cast(t) for t in items]


def parse_int(value) -> int:
    x = parse_number(value)
    if x != round(x):
        raise ConfigError(f"expected an integer, got {value!r}")
    return int(round(x))


def graph_from_dict(d: dict) -> MetricGraph:
    if "edges" not in d:
        shape = d.get("graph", "star")
        n = len(d.get("path", {}).get("Lbar", [])) or 3
        if shape == "star":
            return MetricGraph.star(n)
        if shape == "interval":
            return MetricGraph.interval()
        raise ConfigError(f"unknown graph shorthand {shape!r}")
    try:
        edges = [Edge(e["id"], e["from"], e["to"]) for e in d["edges"]]
    except (KeyError, TypeError):
        raise ConfigError("each edge needs 'id', 'from' and 'to'") from None
    if "vertices" in d:
        vertices = list(d["vertices"])
    else:
        vertices = []
        for e in edges:
            for v in (e.tail, e.head):
                if v not in vertices:
                    vertices.append(v)
    return MetricGraph(tuple(vertices), tuple(edges))


def path_from_dict(d: dict) -> LissajousPath:
    try:
        Lbar = [parse_number(x) for x in d["Lbar"]]
    except KeyError:
        raise ConfigError("path needs 'Lbar'") from None
    n = len(Lbar)

    def vec(key, default, cast=parse_number):
        raw = d.get(key, default)
        if not isinstance(raw, (list, tuple)):
            raw = [raw] * n
        if len(raw) != n:
            raise ConfigError(f"path.{key} has {len(raw)} entries, expected {n}")
        return [cast(x) for x in raw]

    return LissajousPath(
        Lbar=Lbar,
        rho=vec("rho", 0.0),
        nu=vec("nu", 1, parse_int),
        alpha=vec("alpha", 0.0),
        T=parse_number(d.get("T", 1.0)),
    )


def path_to_dict(path: LissajousPath) -> dict:
    return path.to_dict()


class RunConfig:
    """Merged file + flag settings for one command."""

    def __init__(self, command: str, raw: dict | None = None, source: str | None = None):
        self.command = command
        self.raw = raw or {}
        self.source = source
        self.options = dict(self.raw.get("options", {}))
        self._graph = None
        self._path = None

    @classmethod
    def load(cls, command: str, location) -> "RunConfig":
        if location is None:
            return cls(command)
        p = Path(location)
        try:
            raw = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {p}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        return cls(command, raw, str(p))

    def override_path(self, **fields):
        """Replace path fields given on the command line (``None`` means keep)."""
        path = dict(self.raw.get("path", {}))
        for k, v in fields.items():
            if v is not None:
                path[k] = v
        if path:
            self.raw["path"] = path
        self._path = None

    def set_option(self, key, value):
        if value is not None:
            self.options[key] = value

    def option(self, key, default=None):
        return self.options.get(key, default)

    @property
    def graph(self) -> MetricGraph:
        if self._graph is None:
            self._graph = graph_from_dict(self.raw)
        return self._graph

    @property
    def path(self) -> LissajousPath:
        if self._path is None:
            if "path" not in self.raw:
                raise ConfigError("config has no 'path' section")
            path = path_from_dict(self.raw["path"])
            if self.options.get("canonical"):
                path = path.canonical()
            self._path = path
        return self._path

    def validated(self) -> tuple[MetricGraph, LissajousPath]:
        g, p = self.graph, self.path
        validate(g, p)
        return g, p

    def to_dict(self) -> dict:
        out = {"command": self.command, "source": self.source, "options": self.options}
        if "path" in self.raw:
            try:
                out["graph"] = self.graph.to_dict()
                out["path"] = self.path.to_dict()
            except ConfigError:
                out["raw"] = self.raw
        return out
