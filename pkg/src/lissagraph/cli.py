"""Command-line entry point: ``lissagraph <command> [config.json] [flags]``.

Every command writes its CSV/JSON artifacts, optional PNG figures and a
``manifest.json`` into the output directory.  Exit status is 0 on success, 2
for configuration errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import evolution, phase, spectral
from .config import RunConfig, parse_int, parse_list
from .errors import ConfigError, NumericalError
from .graph import knot_polyline
from .output import write_csv, write_json, versions

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_TAU_INTERVALS = phase.DEFAULT_NODES
DEFAULT_SWEEP_RHOS = [0.1 * 2.0**-k for k in range(7)]


class Run:
    """Collects outputs, results and timings for the manifest."""

    def __init__(self, cfg: RunConfig, out: Path, plot: bool):
        self.cfg = cfg
        self.out = out
        self.plot = plot
        self.files: list[str] = []
        self.results: dict = {}
        self.timings: dict = {}
        self.tolerances: dict = {}
        self._pending: list = []

    def csv(self, name, header, columns):
        self._pending.append(("csv", name, header, columns))

    def json(self, name, data):
        self._pending.append(("json", name, data))

    def figure(self, name, fn, *args, **kw):
        if self.plot:
            self._pending.append(("fig", name, fn, args, kw))

    def timed(self, key):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[key] = time.perf_counter() - self.t0

        return _Timer()

    def flush(self):
        """Write everything at once, after the computation succeeded."""
        self.out.mkdir(parents=True, exist_ok=True)
        for item in self._pending:
            kind, name = item[0], item[1]
            target = self.out / name
            target.parent.mkdir(parents=True, exist_ok=True)
            if kind == "csv":
                write_csv(target, item[2], item[3])
            elif kind == "json":
                write_json(target, item[2])
            else:
                item[2](target, *item[3], **item[4])
            self.files.append(name)
        self._pending = []

    def manifest(self, status, error=None):
        self.out.mkdir(parents=True, exist_ok=True)
        data = {
            "status": status,
            "inputs": self.cfg.to_dict(),
            "versions": versions(),
            "tolerances": self.tolerances,
            "results": self.results,
            "timings": self.timings,
            "outputs": self.files,
        }
        if error is not None:
            data["error"] = error
        write_json(self.out / "manifest.json", data)


# --- commands -------------------------------------------------------------


def _tau_grid(cfg):
    try:
        return phase.tau_grid(int(cfg.option("tau_nodes", DEFAULT_TAU_INTERVALS)))
    except ValueError as exc:
        raise ConfigError(f"--tau-nodes: {exc}") from None


def cmd_spectrum(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    n = int(cfg.option("levels", 60))
    grid = _tau_grid(cfg)
    gap_tol = float(cfg.option("gap_tol", spectral.default_gap_tol(path.total_mean_length)))
    run.tolerances.update(root_tol=spectral.ROOT_TOL, gap_tol=gap_tol)
    with run.timed("track_levels"):
        curves = spectral.track_levels(graph, path, n + 1, grid, gap_tol)
    K = np.stack([c.k for c in curves], axis=1)
    closure = max(c.closure_error for c in curves)
    min_gap = float(np.min(np.diff(K, axis=1))) if K.shape[1] > 1 else math.inf
    # vertex-condition residuals of the eigenstates on a coarse subset of nodes
    residuals = []
    L_all = path.lengths(grid)
    with run.timed("residuals"):
        for i in np.linspace(0, grid.size - 1, 17).round().astype(int):
            worst, level = 0.0, 0
            for j in range(1, K.shape[1]):
                st = spectral.eigenstate(float(K[i, j]), L_all[i], graph)
                r = max(spectral.vertex_residuals(st, graph))
                if r > worst:
                    worst, level = r, j
            residuals.append({"tau": float(grid[i]), "level": level, "residual": worst})
    run.csv("levels.csv", ["tau"] + [f"k{j}" for j in range(K.shape[1])], [grid] + list(K.T))
    run.json("residuals.json", residuals)
    run.results.update(levels=n, closure_error=closure, min_gap=min_gap)
    from . import plotting

    run.figure("spectrum.png", plotting.spectrum, grid, K[:, 1:])


def cmd_phase(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    levels = _levels(cfg.option("levels", "1-60"))
    grid = _tau_grid(cfg)
    run.tolerances.update(tau_intervals=grid.size - 1, gap_tol=spectral.default_gap_tol(path.total_mean_length))
    with run.timed("geometric_phases"):
        traces = phase.geometric_phases(levels, graph, path, grid, workers=evolution.worker_count())
    ns = np.array(sorted(traces), dtype=np.int64)
    totals = np.array([traces[n].total for n in ns])
    errs = np.array([traces[n].error_estimate for n in ns])
    run.csv("gamma_levels.csv", ["n", "Gamma_total"], [ns, totals])
    trace_levels = _levels(cfg.option("trace_levels", ",".join(str(n) for n in ns[:3])))
    for n in trace_levels:
        if n in traces:
            run.csv(f"traces/phase_n{n}.csv", ["tau", "Gamma_accumulated"], [grid, traces[n].accumulated])
    run.results.update(
        totals={int(n): float(g) for n, g in zip(ns, totals)},
        max_quadrature_error=float(errs.max()),
    )
    from . import plotting

    run.figure("gamma_levels.png", plotting.level_phases, ns, totals)
    run.figure("phase_traces.png", plotting.phase_traces, {n: traces[n] for n in trace_levels if n in traces})


def cmd_ground_phase(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    grid = _tau_grid(cfg)
    with run.timed("ground_phase"):
        tr = phase.ground_phase(graph, path, grid)
    run.csv("phase.csv", ["tau", "Gamma_accumulated"], [grid, tr.accumulated])
    res = {"Gamma_total": tr.total, "quadrature_error": tr.error_estimate,
           "leading_order": phase.leading_order_ground(path)}
    if path.n_edges == 3:
        res["third_order"] = phase.third_order_ground(path)
    run.results.update(res)
    run.tolerances.update(tau_intervals=grid.size - 1)
    from . import plotting

    run.figure("phase.png", plotting.phase_traces, {0: tr})


def cmd_sweep(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    grid = _tau_grid(cfg)
    from . import plotting

    phis = cfg.option("phis")
    if phis is not None:
        n_phi = int(phis)
        if n_phi < 2:
            raise ConfigError("--phis needs at least two points")
        rho = float(cfg.option("rho_fixed", path.rho[0] if path.rho[0] > 0 else 1e-3))
        p = path.replace(rho=np.full(path.n_edges, rho))
        phi = np.linspace(0.0, 2 * math.pi, n_phi, endpoint=False)
        with run.timed("alpha_sweep"):
            rows = phase.alpha_sweep(p, phi, grid)
        vals = np.array([v for _, v in rows])
        lead = phase.leading_order_ground(p) / rho**2
        # least-squares fit of (vals - lead) to a cos(phi) + b sin(phi) + c
        basis = np.stack([np.cos(phi), np.sin(phi), np.ones_like(phi)], axis=1)
        coef, *_ = np.linalg.lstsq(basis, vals - lead, rcond=None)
        fit = basis @ coef
        resid = float(np.max(np.abs(vals - lead - fit)) / max(np.max(np.abs(vals - lead)), 1e-300))
        run.csv("alpha_sweep.csv", ["phi", "Gamma_over_rho2"], [phi, vals])
        run.results.update(rho=rho, leading_over_rho2=lead,
                           cosine_amplitude=float(np.hypot(coef[0], coef[1])),
                           cosine_fit_relative_residual=resid)
        run.figure("alpha_sweep.png", plotting.alpha_sweep, phi, vals)
        return
    rhos = cfg.option("rhos", DEFAULT_SWEEP_RHOS)
    rhos = [float(r) for r in rhos]
    if any(r <= 0 for r in rhos) or any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError("rho list must be positive and strictly decreasing")
    with run.timed("rho_sweep"):
        rows = phase.rho_sweep(path, rhos, grid)
    rho = np.array([r.rho for r in rows])
    G = np.array([r.gamma for r in rows])
    lead = np.array([r.leading for r in rows])
    delta = G - lead
    slope = phase.loglog_slope(rho, delta)
    run.csv("sweep.csv", ["rho", "Gamma", "Gamma_over_rho2", "leading_order", "delta"],
            [rho, G, G / rho**2, lead, delta])
    run.results.update(loglog_slope=slope)
    run.figure("sweep.png", plotting.rho_sweep, rho, G / rho**2, lead / rho**2, delta, slope)


def cmd_orders(run: Run):
    cfg = run.cfg
    nu = cfg.option("nu")
    if nu is None:
        nu = list(cfg.path.nu)
    nu = [int(v) for v in nu]
    if any(v < 1 for v in nu):
        raise ConfigError("frequencies must be positive")
    q_max = int(cfg.option("qmax", 8))
    if not 2 <= q_max <= 20:
        raise ConfigError("qmax must lie in [2, 20]")
    tuples = phase.allowed_orders(nu, q_max)
    run.json("orders.json", {
        "nu": nu,
        "q_max": q_max,
        "min_mixed_order": phase.min_mixed_order(nu, q_max),
        "orders": [t.to_dict() for t in tuples],
    })
    run.results.update(count=len(tuples), min_mixed_order=phase.min_mixed_order(nu, q_max))


def cmd_recover(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    rhos = [float(r) for r in cfg.option("rhos", [1e-3, 5e-4])]
    nu_max = int(cfg.option("nu_max", 20))
    grid = _tau_grid(cfg)
    samples = []
    with run.timed("ground_phase_samples"):
        for e in range(path.n_edges):
            for r in rhos:
                rho = np.zeros(path.n_edges)
                rho[e] = r
                samples.append((rho, phase.ground_phase(graph, path.replace(rho=rho), grid).total))
    fit = phase.recover_frequencies(samples, path.Lbar, nu_max)
    report = fit.to_dict()
    report["samples"] = [{"rho": list(r), "Gamma": g} for r, g in samples]
    run.json("recover.json", report)
    run.results.update(nu=list(fit.nu), residuals=list(fit.residuals))
    run.tolerances.update(integer_residual=1e-2)


def cmd_evolve(run: Run):
    cfg = run.cfg
    graph, path = cfg.validated()
    n = int(cfg.option("level", 1))
    T = float(cfg.option("T", path.T))
    M = int(cfg.option("M", evolution.DEFAULT_M))
    steps = int(cfg.option("steps", evolution.DEFAULT_STEPS))
    picture = cfg.option("picture", "g")
    boundary = cfg.option("boundary", "kirchhoff")
    from . import plotting

    run.tolerances.update(norm_drift=1e-8, cfl_limit=evolution.CFL_LIMIT)
    if boundary in ("neumann", "robin"):
        if graph.n_edges != 1:
            raise ConfigError("the Neumann flux run needs a single-edge graph")
        with run.timed("flux"):
            fs = evolution.neumann_flux_defect(path, T, M, steps, boundary, n)
        run.csv("flux.csv", ["tau", "measured", "predicted"], [fs.tau, fs.measured, fs.predicted])
        run.results.update(max_relative_error=fs.max_relative_error, norm_drift=fs.drift)
        run.figure("flux.png", plotting.flux, fs.tau, fs.measured, fs.predicted)
        return
    with run.timed("evolve"):
        res = evolution.evolve(graph, path, n, T, M, steps, picture, boundary,
                               record=int(cfg.option("record", 100)))
    run.csv("evolution.csv", ["tau", "norm_sq", "overlap_abs", "phase"],
            [res.tau, res.norm_sq, res.overlap_abs, res.phase])
    run.results.update(
        norm_drift=res.norm_drift,
        total_phase=res.total_phase,
        dynamical_phase=res.dynamical_phase,
        residual_phase=float(evolution.wrap_phase(res.residual_phase)),
        final_overlap=float(res.overlap_abs[-1]),
        initial_level=res.initial_level,
    )
    run.figure("evolution.png", plotting.evolution, res.tau, res.norm_sq, res.overlap_abs, res.phase)
    T_list = cfg.option("T_list")
    if T_list:
        gamma = phase.geometric_phase(n, graph, path, _tau_grid(cfg)).total
        with run.timed("convergence"):
            rows = evolution.convergence_study(
                graph, path, n, [float(t) for t in T_list], gamma, M,
                steps_per_T=float(cfg.option("steps_per_T", 200)), min_steps=steps,
            )
        Ts = np.array([r.T for r in rows])
        err = np.array([r.phase_error for r in rows])
        run.csv("convergence.csv", ["T", "phase_error"], [Ts, err])
        run.results.update(
            Gamma=gamma,
            convergence=[{"T": r.T, "residual_phase": r.residual_phase, "predicted": r.predicted,
                          "phase_error": r.phase_error, "norm_drift": r.norm_drift,
                          "final_overlap": r.final_overlap} for r in rows],
            convergence_slope=phase.loglog_slope(Ts, err) if len(rows) > 1 else None,
        )
        run.figure("convergence.png", plotting.convergence, Ts, err)


def cmd_knot(run: Run):
    cfg = run.cfg
    _, path = cfg.validated()
    n = int(cfg.option("samples", 2001))
    pts = knot_polyline(path, n)
    tau = np.linspace(0.0, 1.0, n)
    run.csv("knot.csv", ["tau", "L1", "L2", "L3"], [tau, pts[:, 0], pts[:, 1], pts[:, 2]])
    from . import plotting

    run.figure("knot.png", plotting.knot, pts)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "phase": cmd_phase,
    "ground-phase": cmd_ground_phase,
    "sweep": cmd_sweep,
    "orders": cmd_orders,
    "recover": cmd_recover,
    "evolve": cmd_evolve,
    "knot": cmd_knot,
}


def _levels(spec) -> list[int]:
    """``"1-60"``, ``"1,2,5"`` or a list."""
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    out = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            a, b = parse_int(a), parse_int(b)
            if b < a:
                raise ConfigError(f"bad level range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(parse_int(part))
    if not out or min(out) < 0:
        raise ConfigError("levels must be non-negative integers")
    return sorted(set(out))


# --- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lissagraph", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("config", nargs=None if needs_config else "?", help="JSON graph/path file")
        p.add_argument("-o", "--out", default=None, help="output directory (default: out/<command>)")
        p.add_argument("--no-plot", action="store_true", help="skip PNG figures")
        p.add_argument("--tau-nodes", type=int, default=None,
                       help=f"even number of tau intervals (default {DEFAULT_TAU_INTERVALS})")
        p.add_argument("--canonical", action="store_true", help="shift time origin so alpha_1 = 0")
        for name in ("Lbar", "rho", "nu", "alpha"):
            p.add_argument(f"--{name}", default=None, help=f"override path.{name} (comma list)")
        p.add_argument("--T", dest="T_path", default=None, help="override path.T")

    p = sub.add_parser("spectrum", help="level curves k_n(tau)")
    common(p)
    p.add_argument("--levels", type=int, default=None, help="positive levels to track (default 60)")
    p.add_argument("--gap-tol", type=float, default=None)

    p = sub.add_parser("phase", help="geometric phase of selected levels")
    common(p)
    p.add_argument("--levels", default=None, help="e.g. 1-60 or 0,1,2 (default 1-60)")
    p.add_argument("--trace-levels", default=None, help="levels whose tau traces are written")

    p = sub.add_parser("ground-phase", help="ground-state phase integral")
    common(p)

    p = sub.add_parser("sweep", help="rho or alpha sweeps of the ground phase")
    common(p)
    p.add_argument("--rhos", default=None, help="decreasing rho list")
    p.add_argument("--phis", type=int, default=None, help="number of phase offsets in [0, 2pi)")
    p.add_argument("--rho-fixed", type=float, default=None, help="amplitude for the phase-offset sweep")

    p = sub.add_parser("orders", help="admissible perturbative orders")
    common(p, needs_config=False)
    p.add_argument("--qmax", type=int, default=None)

    p = sub.add_parser("recover", help="infer frequencies from small-amplitude ground phases")
    common(p)
    p.add_argument("--rhos", default=None, help="small amplitudes, two or more for extrapolation")
    p.add_argument("--nu-max", type=int, default=None)

    p = sub.add_parser("evolve", help="direct time propagation over one cycle")
    common(p)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--M", type=int, default=None, help="intervals per edge")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--picture", choices=["g", "omega"], default=None)
    p.add_argument("--boundary", choices=["kirchhoff", "neumann", "robin"], default=None)
    p.add_argument("--T-list", default=None, help="comma list of T for a convergence study")
    p.add_argument("--steps-per-T", type=float, default=None)
    p.add_argument("--record", type=int, default=None, help="number of recorded samples")

    p = sub.add_parser("knot", help="export the Lissajous polyline")
    common(p)
    p.add_argument("--samples", type=int, default=None)
    return ap


def _merge(cfg: RunConfig, args):
    def list_or_none(v):
        if v is None:
            return None
        vals = parse_list(v)
        # a single value applies to every edge
        return vals[0] if len(vals) == 1 else vals

    cfg.override_path(
        Lbar=None if args.Lbar is None else parse_list(args.Lbar),
        rho=list_or_none(args.rho),
        nu=list_or_none(args.nu),
        alpha=list_or_none(args.alpha),
        T=None if args.T_path is None else float(parse_list(args.T_path)[0]),
    )
    if args.canonical:
        cfg.set_option("canonical", True)
    cfg.set_option("tau_nodes", args.tau_nodes)
    simple = ["levels", "gap_tol", "trace_levels", "phis", "rho_fixed", "qmax", "nu_max",
              "level", "M", "steps", "picture", "boundary", "steps_per_T", "record", "samples"]
    for key in simple:
        if hasattr(args, key):
            cfg.set_option(key, getattr(args, key))
    if getattr(args, "rhos", None) is not None:
        cfg.set_option("rhos", parse_list(args.rhos))
    if getattr(args, "T_list", None) is not None:
        cfg.set_option("T_list", parse_list(args.T_list))
    if args.command == "orders" and args.nu is not None:
        cfg.set_option("nu", [parse_int(v) for v in args.nu.split(",")])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else Path("out") / args.command
    cfg = RunConfig(args.command)
    run = Run(cfg, out, plot=not args.no_plot)
    try:
        cfg = RunConfig.load(args.command, args.config)
        run.cfg = cfg
        _merge(cfg, args)
        run.plot = run.plot and bool(cfg.option("plot", True))
        t0 = time.perf_counter()
        COMMANDS[args.command](run)
        run.timings["total"] = time.perf_counter() - t0
        run.flush()
    except ConfigError as exc:
        run.manifest("config_error", {"error": type(exc).__name__, "message": str(exc)})
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        run.manifest("numerical_error", exc.to_dict())
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    run.manifest("ok")
    print(f"wrote {len(run.files)} files to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
