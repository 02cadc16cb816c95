"""Experiment harness and command-line interface.

Subcommands:
  pum solve  --domain <id|polygon:<file>> --method <c|ls> --solution <u1..u5>
             --H <v> --n <v> [--delta 0.2] [--eps <v>] [--beta 1.5]
             [--probes 1000] [--out <dir>] [--export-matrix <file>]
  pum sweep  --experiment <alg-conv|spec-conv|stab-H|stab-beta|stab-eps|
             timing> --config <file>

Config files are `key=value` lines with `#` comments.  Every sweep writes one
CSV (schema `param,error_inf,N,M,P,stab_norm,t_setup,t_assemble,t_solve,
flag`) and one SVG plot.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import svgplot, system
from .cover import build_cover
from .geometry import standard_domain
from .kernels import ConditioningError, Kernel
from .problems import DEFAULT_EPS, manufactured
from .sampling import fill_distance, halton_in_domain
from .system import SolverError

EXPERIMENTS = ("alg-conv", "spec-conv", "stab-H", "stab-beta", "stab-eps",
               "timing")
FLOOR_FACTOR = 10.0
MACHINE_EPS = 1e-16
CSV_HEADER = ("param,error_inf,N,M,P,stab_norm,t_setup,t_assemble,t_solve,"
              "flag")


@dataclass
class ExperimentConfig:
    experiment: str
    domain: str = "box"
    method: str = "least-squares"
    solution: str = "u2"
    sweep: tuple = ()
    H: float = 0.4
    n: int = 28
    delta: float = 0.2
    eps: float | None = None
    beta: float = 1.5
    probes: int = 1000
    out: str = "."
    seed: int = 0

    def __post_init__(self):
        vals = tuple(self.sweep)
        if len(vals) >= 2 and not (all(a < b for a, b in zip(vals, vals[1:]))
                                   or all(a > b for a, b in
                                          zip(vals, vals[1:]))):
            raise ValueError("sweep values must be strictly monotone")
        self.sweep = vals


@dataclass
class RunResult:
    param: float
    error_inf: float = math.nan
    N: int = 0
    M: int = 0
    P: int = 0
    stab_norm: float = math.nan
    timings: dict = field(default_factory=dict)
    flag: str = ""
    fill: float = math.nan
    orthogonality: float | None = None
    note: str = ""

    @property
    def t_setup(self):
        return self.timings.get("cover", 0.0) + self.timings.get("layout",
                                                                 0.0)

    @property
    def t_assemble(self):
        return (self.timings.get("local-ops", 0.0)
                + self.timings.get("assembly", 0.0))

    @property
    def t_solve(self):
        return (self.timings.get("factorize", 0.0)
                + self.timings.get("solve", 0.0))

    @property
    def t_total(self):
        return self.t_setup + self.t_assemble + self.t_solve

    def csv_row(self):
        def num(v):
            return "nan" if v is None or not math.isfinite(v) else f"{v:.12e}"
        return (f"{self.param:.12g},{num(self.error_inf)},{self.N},{self.M},"
                f"{self.P},{num(self.stab_norm)},{self.t_setup:.6f},"
                f"{self.t_assemble:.6f},{self.t_solve:.6f},{self.flag}")


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    results: list
    slope: float = math.nan
    slope_residual: float = math.nan
    excluded: tuple = ()
    mode: str = "algebraic"   # or 'spectral'


def poly_degree(n, d):
    """Largest q with binom(q + d, d) <= n (polynomial degree supported by n
    points in d dimensions)."""
    if n < 1:
        raise ValueError("need at least one point")
    q = 0
    while math.comb(q + 1 + d, d) <= n:
        q += 1
    return q


def collocation_spacing(H, n, delta, dim):
    """Grid spacing giving roughly n nodes in an interior patch."""
    rho = (1.0 + delta) * math.sqrt(dim) * H / 2.0
    if dim == 2:
        return rho * math.sqrt(math.pi / n)
    return rho * (4.0 * math.pi / (3.0 * n)) ** (1.0 / 3.0)


def run_single(domain_id, method, solution, H, n, delta=0.2, eps=None,
               beta=1.5, probes=1000, with_norm=True, param=None):
    """One build -> assemble -> solve -> probe pipeline; returns RunResult
    (error = NaN with a flag on solver failure)."""
    domain = standard_domain(domain_id) if isinstance(domain_id, str) \
        else domain_id
    problem = manufactured(solution)
    eps_val = DEFAULT_EPS[solution] if eps is None else float(eps)
    kernel = Kernel("gaussian", eps_val)
    res = RunResult(param=H if param is None else param)
    try:
        t0 = time.perf_counter()
        cov = build_cover(domain, H, delta)
        res.timings["cover"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if method in ("ls", "least-squares"):
            layout = system.ls_layout(domain, cov, kernel, n, beta)
        elif method in ("c", "collocation"):
            h = collocation_spacing(H, n, delta, domain.dim)
            layout = system.collocation_layout(domain, cov, kernel, h)
        else:
            raise ValueError(f"unknown method {method!r}")
        res.timings["layout"] = time.perf_counter() - t0
        res.N, res.M, res.P = layout.n_nodes, layout.n_eval, cov.patch_count

        t0 = time.perf_counter()
        gs = system.assemble(problem, cov, kernel, layout, domain)
        res.timings["local-ops"] = time.perf_counter() - t0
        res.timings["assembly"] = 0.0

        report = system.solve(gs)
        res.timings.update(report.timings)
        res.orthogonality = report.orthogonality

        t0 = time.perf_counter()
        pts = halton_in_domain(domain, probes)
        vals = system.evaluate_solution(gs, report, pts)
        res.error_inf = float(np.abs(vals - problem.exact(pts)).max())
        res.timings["evaluate"] = time.perf_counter() - t0
        if with_norm:
            res.stab_norm = system.stability_norm(gs, report, probes)
            if res.error_inf <= FLOOR_FACTOR * res.stab_norm * MACHINE_EPS:
                res.flag = "floor"
        res.fill = fill_distance(layout.nodes, domain,
                                 n_probes=min(10000, 4 * res.N + 1000))
    except (ConditioningError, SolverError) as exc:
        res.flag = "failed"
        res.error_inf = math.nan
        res.note = str(exc)
    return res


def fit_loglog_slope(params, errors, included):
    """Least-squares slope of log(error) against log(param)."""
    x = np.log([p for p, ok in zip(params, included) if ok])
    y = np.log([e for e, ok in zip(errors, included) if ok])
    if len(x) < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid


def fit_spectral_rate(fills, errors, included):
    """Slope of log(error) against -1/h: error ~ exp(-gamma / h)."""
    x = np.array([-1.0 / h for h, ok in zip(fills, included) if ok])
    y = np.log([e for e, ok in zip(errors, included) if ok])
    if len(x) < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid


def _floor_included(results):
    return [(r.flag != "failed") and math.isfinite(r.error_inf)
            and r.error_inf > 0 and "floor" not in r.flag
            for r in results]


def _write_csv(path, results):
    lines = [CSV_HEADER] + [r.csv_row() for r in results]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig):
    """Convergence experiments (alg-conv / spec-conv) and, re-using the same
    loop, the stability and timing sweeps."""
    os.makedirs(config.out, exist_ok=True)
    exp = config.experiment
    results = []
    eps_used = config.eps
    for v in config.sweep:
        kw = dict(domain_id=config.domain, method=config.method,
                  solution=config.solution, delta=config.delta,
                  beta=config.beta, probes=config.probes, eps=eps_used,
                  with_norm=True)
        if exp in ("alg-conv", "stab-H", "timing"):
            r = run_single(H=v, n=config.n, param=v, **kw)
        elif exp == "spec-conv":
            r = run_single(H=config.H, n=int(v), param=v, **kw)
        elif exp == "stab-beta":
            kw["beta"] = v
            r = run_single(H=config.H, n=config.n, param=v, **kw)
        elif exp == "stab-eps":
            kw["eps"] = v
            r = run_single(H=config.H, n=config.n, param=v, **kw)
        else:
            raise ValueError(f"unknown experiment {exp!r}")
        results.append(r)

    report = ConvergenceReport(config, results)
    included = _floor_included(results)
    errors = [r.error_inf for r in results]
    if exp in ("alg-conv", "stab-H", "timing"):
        report.slope, report.slope_residual = fit_loglog_slope(
            [r.param for r in results], errors, included)
        report.mode = "algebraic"
    elif exp == "spec-conv":
        fills = [r.fill for r in results]
        report.slope, report.slope_residual = fit_spectral_rate(
            fills, errors, included)
        report.mode = "spectral"
    report.excluded = tuple(i for i, ok in enumerate(included) if not ok)

    stem = os.path.join(config.out, f"{exp}_{config.method}_"
                                    f"{config.solution}")
    _write_csv(stem + ".csv", results)
    _plot_experiment(stem + ".svg", report)
    return report


def stability_sweep(config: ExperimentConfig):
    """Alias kept for the stability experiments; identical loop."""
    return run_experiment(config)


def _plot_experiment(path, report: ConvergenceReport):
    cfg = report.config
    res = report.results
    exp = cfg.experiment
    if exp in ("stab-H", "stab-beta", "stab-eps"):
        series = [
            {"x": [r.param for r in res], "y": [r.stab_norm for r in res],
             "label": "stability norm"},
            {"x": [r.param for r in res], "y": [r.error_inf for r in res],
             "label": "error"},
        ]
        svgplot.line_plot(path, series, xlabel=exp.split("-")[1],
                          ylabel="value", title=f"{exp} ({cfg.method}, "
                          f"{cfg.solution})", xlog=exp == "stab-H", ylog=True)
        return
    if exp == "timing":
        series = [{"x": [r.error_inf for r in res],
                   "y": [r.t_total for r in res], "label": cfg.method}]
        svgplot.line_plot(path, series, xlabel="error", ylabel="seconds",
                          title=f"time vs error ({cfg.solution})", xlog=True,
                          ylog=True)
        return
    if report.mode == "spectral":
        xs = [-1.0 / r.fill if r.fill and math.isfinite(r.fill) else None
              for r in res]
        series = [{"x": [x for x in xs if x is not None],
                   "y": [r.error_inf for r, x in zip(res, xs)
                         if x is not None],
                   "label": f"{cfg.method}"}]
        svgplot.line_plot(path, series, xlabel="-1/h", ylabel="max error",
                          title=f"spectral convergence ({cfg.solution})",
                          xlog=False, ylog=True,
                          annotations=[f"rate {report.slope:.2f}"])
        return
    series = [{"x": [r.param for r in res], "y": [r.error_inf for r in res],
               "label": f"{cfg.method} n={cfg.n}"}]
    svgplot.line_plot(path, series, xlabel="H", ylabel="max error",
                      title=f"algebraic convergence ({cfg.solution})",
                      xlog=True, ylog=True,
                      annotations=[f"slope {report.slope:.2f} "
                                   f"(excluded {list(report.excluded)})"])


def parse_config(path) -> ExperimentConfig:
    raw = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            raw[k] = v

    def conv(key, cast, default):
        return cast(raw[key]) if key in raw else default

    sweep = ()
    if "sweep" in raw:
        sweep = tuple(float(s) for s in raw["sweep"].split(","))
    return ExperimentConfig(
        experiment=raw.get("experiment", "alg-conv"),
        domain=raw.get("domain", "box"),
        method=raw.get("method", "least-squares"),
        solution=raw.get("solution", "u2"),
        sweep=sweep,
        H=conv("H", float, 0.4),
        n=conv("n", int, 28),
        delta=conv("delta", float, 0.2),
        eps=conv("eps", float, None) if "eps" in raw else None,
        beta=conv("beta", float, 1.5),
        probes=conv("probes", int, 1000),
        out=raw.get("out", "."),
        seed=conv("seed", int, 0),
    )


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pum",
        description="Meshfree RBF partition-of-unity Poisson solver")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one Poisson problem")
    ps.add_argument("--domain", default="box")
    ps.add_argument("--method", default="ls", choices=("c", "ls",
                                                       "collocation",
                                                       "least-squares"))
    ps.add_argument("--solution", default="u1",
                    choices=("u1", "u2", "u3", "u4", "u5"))
    ps.add_argument("--H", type=float, required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--delta", type=float, default=0.2)
    ps.add_argument("--eps", type=float, default=None)
    ps.add_argument("--beta", type=float, default=1.5)
    ps.add_argument("--probes", type=int, default=1000)
    ps.add_argument("--out", default=None)
    ps.add_argument("--export-matrix", default=None)
    ps.add_argument("--no-norm", action="store_true")

    pw = sub.add_parser("sweep", help="run a predefined experiment sweep")
    pw.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    pw.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    return _cmd_sweep(args)


def _cmd_solve(args):
    domain = standard_domain(args.domain)
    problem = manufactured(args.solution)
    eps = DEFAULT_EPS[args.solution] if args.eps is None else args.eps
    kernel = Kernel("gaussian", eps)
    res = RunResult(param=args.H)
    t0 = time.perf_counter()
    cov = build_cover(domain, args.H, args.delta)
    res.timings["cover"] = time.perf_counter() - t0
    print(cov.summary())

    t0 = time.perf_counter()
    if args.method in ("ls", "least-squares"):
        layout = system.ls_layout(domain, cov, kernel, args.n, args.beta)
    else:
        h = collocation_spacing(args.H, args.n, args.delta, domain.dim)
        layout = system.collocation_layout(domain, cov, kernel, h)
    res.timings["layout"] = time.perf_counter() - t0
    res.N, res.M, res.P = layout.n_nodes, layout.n_eval, cov.patch_count

    t0 = time.perf_counter()
    gs = system.assemble(problem, cov, kernel, layout, domain)
    res.timings["local-ops"] = time.perf_counter() - t0
    if args.export_matrix:
        system.export_matrix(args.export_matrix, gs)
    report = system.solve(gs)
    res.timings.update(report.timings)
    res.orthogonality = report.orthogonality

    t0 = time.perf_counter()
    pts = halton_in_domain(domain, args.probes)
    res.error_inf = float(np.abs(system.evaluate_solution(gs, report, pts)
                                 - problem.exact(pts)).max())
    res.timings["evaluate"] = time.perf_counter() - t0
    print(f"method={layout.method} N={layout.n_nodes} M={layout.n_eval} "
          f"eps={eps}")
    print(f"error_inf={res.error_inf:.6e}")
    if report.orthogonality is not None:
        print(f"orthogonality={report.orthogonality:.3e}")
    if not args.no_norm:
        res.stab_norm = system.stability_norm(gs, report, args.probes)
        print(f"stability_norm={res.stab_norm:.6e}")
    for phase, t in sorted(res.timings.items()):
        print(f"t_{phase}={t:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(os.path.join(args.out, "solve.csv"), [res])
    return 0


def _cmd_sweep(args):
    config = parse_config(args.config)
    config.experiment = args.experiment
    report = run_experiment(config)
    for r in report.results:
        print(r.csv_row())
    if math.isfinite(report.slope):
        kind = "slope" if report.mode == "algebraic" else "rate"
        print(f"fitted_{kind}={report.slope:.4f} "
              f"residual={report.slope_residual:.3e} "
              f"excluded={list(report.excluded)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
