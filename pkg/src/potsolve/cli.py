"""Experiment harness: generators, solver dispatch, trace files, CLI.

Exit codes: 0 success, 1 usage error (bad flags, unreadable inputs),
2 solve failure (non-convergence, oracle breakdown).  Traces are
line-delimited JSON: a config record with every resolved constant, one
record per traced iteration, and a final summary record.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import files
from .apdagd import approx_pot_apdagd
from .core import PotProblem, SolveReport, validate_problem
from .dualextra import de_solve
from .errors import NotConverged, PotError
from .generators import GeneratorSpec, generate
from .reference import solve_exact
from .sinkhorn import solve_feasible, solve_infeasible

__all__ = ["RunConfig", "run_experiment", "scaling_study", "main"]

_ALGOS = ("sinkhorn_infeasible", "sinkhorn", "apdagd", "de", "exact")
_ORACLE_N_LIMIT = 64


@dataclass
class RunConfig:
    algo: str
    eps: float
    r_path: str
    c_path: str
    cost_path: str
    s: float
    out_path: str
    max_iter: int = 1_000_000
    A_val: float | None = None
    fstar: float | None = None
    trace_every: int = 0

    def __post_init__(self):
        if self.algo not in _ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


def _record_from(rec, fstar):
    out = {
        "record": "iter",
        "iter": rec.iter,
        "objective": rec.objective,
        "violation": rec.violation,
        "elapsed_s": rec.elapsed,
    }
    if rec.primal_gap is not None:
        out["primal_gap"] = rec.primal_gap
    elif fstar is not None:
        out["primal_gap"] = rec.objective - fstar
    return out


def _json_safe(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _dispatch(config: RunConfig, problem: PotProblem, fstar) -> SolveReport:
    if config.algo == "sinkhorn_infeasible":
        return solve_infeasible(problem, config.eps, A_val=config.A_val,
                                max_iter=config.max_iter, fstar=fstar,
                                trace_every=config.trace_every)
    if config.algo == "sinkhorn":
        return solve_feasible(problem, config.eps, max_iter=config.max_iter,
                              fstar=fstar, trace_every=config.trace_every)
    if config.algo == "apdagd":
        return approx_pot_apdagd(problem, config.eps, max_iter=config.max_iter,
                                 fstar=fstar, trace_every=config.trace_every)
    if config.algo == "de":
        return de_solve(problem, config.eps, t_cap=config.max_iter, fstar=fstar)
    sol = solve_exact(problem)
    if sol.status != "optimal":
        raise PotError(f"oracle status {sol.status}")
    return SolveReport(
        plan=sol.plan, objective=sol.value, violation=0.0, iterations=sol.pivots,
        trace=[], meta={"algo": "exact", "f_star": sol.value,
                        "plan": {"X": sol.plan.X, "p": sol.plan.p, "q": sol.plan.q}},
    )


def run_experiment(config: RunConfig) -> int:
    """Solve one instance per the config and write its trace file."""
    t0 = time.perf_counter()
    try:
        r = files.read_marginal(config.r_path)
        c = files.read_marginal(config.c_path)
        C = files.read_cost(config.cost_path)
        problem = validate_problem(r, c, config.s, C)
    except Exception as exc:  # unreadable or inconsistent inputs
        err = {"record": "error", "stage": "parse",
               "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1

    fstar = config.fstar
    if fstar is None and config.algo != "exact" and problem.n <= _ORACLE_N_LIMIT:
        oracle = solve_exact(problem)
        if oracle.status == "optimal":
            fstar = oracle.value

    status = "ok"
    try:
        report = _dispatch(config, problem, fstar)
    except NotConverged as exc:
        if exc.report is None:
            err = {"record": "error", "stage": "solve",
                   "error": "NotConverged", "message": str(exc)}
            print(json.dumps(err), file=sys.stderr)
            return 2
        report = exc.report
        status = "not_converged"
    except PotError as exc:
        err = {"record": "error", "stage": "solve",
               "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        files.write_trace(config.out_path, [err])
        return 2

    meta = _json_safe(report.meta)
    meta.pop("loop_trace", None)
    meta.pop("plan", None)
    config_rec = {"record": "config", "n": problem.n, "s": problem.s,
                  **{k: _json_safe(v) for k, v in asdict(config).items()},
                  **meta}
    records = [config_rec]
    records += [_record_from(rec, fstar) for rec in report.trace]
    summary = {
        "record": "summary", "algo": config.algo, "n": problem.n,
        "eps": config.eps, "objective": report.objective,
        "violation": report.violation, "iterations": report.iterations,
        "total_s": time.perf_counter() - t0, "status": status,
    }
    if fstar is not None:
        summary["f_star"] = fstar
        summary["primal_gap"] = report.objective - fstar
    if config.algo == "exact":
        summary["plan"] = _json_safe(report.meta["plan"])
    records.append(summary)
    files.write_trace(config.out_path, records)
    return 0 if status == "ok" else 2


def scaling_study(n_list, eps: float, seed: int = 0, mass_r: float = 5.0,
                  mass_c: float = 3.0, s_fraction: float = 0.9):
    """Wall time of the accelerated solver per n, plus the log-log slope."""
    points = []
    for n in n_list:
        problem = generate(GeneratorSpec(
            kind="gaussian_mixture", n=int(n), mass_r=mass_r, mass_c=mass_c,
            s_fraction=s_fraction, seed=seed,
        ))
        t0 = time.perf_counter()
        report = approx_pot_apdagd(problem, eps)
        seconds = time.perf_counter() - t0
        points.append({"n": int(n), "seconds": seconds,
                       "iterations": report.iterations})
    slope = None
    if len(points) >= 2:
        logn = np.log([p["n"] for p in points])
        logt = np.log([p["seconds"] for p in points])
        slope = float(np.polyfit(logn, logt, 1)[0])
    return points, slope


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="potsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--kind", default="gaussian_mixture",
                     choices=("gaussian_mixture", "random_histogram"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--mass-r", type=float, default=5.0)
    gen.add_argument("--mass-c", type=float, default=3.0)
    gen.add_argument("--s-frac", type=float, default=0.9)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-prefix", required=True)

    solve = sub.add_parser("solve", help="solve an instance from files")
    solve.add_argument("--algo", required=True, choices=_ALGOS)
    solve.add_argument("--r", required=True, dest="r_path")
    solve.add_argument("--c", required=True, dest="c_path")
    solve.add_argument("--cost", required=True, dest="cost_path")
    solve.add_argument("--s", type=float, required=True)
    solve.add_argument("--eps", type=float, default=1e-2)
    solve.add_argument("--max-iter", type=int, default=1_000_000)
    solve.add_argument("--A-val", type=float, default=None, dest="A_val")
    solve.add_argument("--fstar", type=float, default=None)
    solve.add_argument("--trace-every", type=int, default=0)
    solve.add_argument("--out", required=True, dest="out_path")

    bench = sub.add_parser("bench-scaling", help="wall-time scaling of apdagd")
    bench.add_argument("--n-list", required=True,
                       help="comma-separated sizes, e.g. 10,30,100")
    bench.add_argument("--eps", type=float, default=0.1)
    bench.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_gen(args) -> int:
    try:
        spec = GeneratorSpec(kind=args.kind, n=args.n, mass_r=args.mass_r,
                             mass_c=args.mass_c, s_fraction=args.s_frac,
                             seed=args.seed)
        problem = generate(spec)
    except (ValueError, PotError) as exc:
        print(json.dumps({"record": "error", "error": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 1
    prefix = args.out_prefix
    paths = {
        "r": f"{prefix}_r.txt", "c": f"{prefix}_c.txt", "cost": f"{prefix}_C.csv",
        "meta": f"{prefix}_meta.json",
    }
    files.write_marginal(paths["r"], problem.r)
    files.write_marginal(paths["c"], problem.c)
    files.write_cost(paths["cost"], problem.C)
    meta = {"spec": asdict(spec), "s": problem.s, "files": paths}
    with open(paths["meta"], "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(json.dumps(meta))
    return 0


def _cmd_solve(args) -> int:
    try:
        config = RunConfig(
            algo=args.algo, eps=args.eps, r_path=args.r_path, c_path=args.c_path,
            cost_path=args.cost_path, s=args.s, out_path=args.out_path,
            max_iter=args.max_iter, A_val=args.A_val, fstar=args.fstar,
            trace_every=args.trace_every,
        )
    except ValueError as exc:
        print(json.dumps({"record": "error", "error": "ValueError",
                          "message": str(exc)}), file=sys.stderr)
        return 1
    return run_experiment(config)


def _cmd_bench(args) -> int:
    try:
        n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
        if not n_list:
            raise ValueError("empty n list")
    except ValueError as exc:
        print(json.dumps({"record": "error", "error": "ValueError",
                          "message": str(exc)}), file=sys.stderr)
        return 1
    points, slope = scaling_study(n_list, args.eps, args.seed)
    for point in points:
        print(json.dumps({"record": "point", **point}))
    print(json.dumps({"record": "fit", "slope": slope, "eps": args.eps,
                      "seed": args.seed}))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gen":
        code = _cmd_gen(args)
    elif args.command == "solve":
        code = _cmd_solve(args)
    else:
        code = _cmd_bench(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
