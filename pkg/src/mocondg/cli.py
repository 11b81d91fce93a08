"""Command line front end: ``mocondg {solve,bench,frontier,constants,report}``.

Exit codes: 0 success, 1 solver failure, 2 usage error. Flags mirror the
benchmark config keys; a ``--config`` file supplies defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkConfig, load_result, run_benchmark, run_frontier, starts_for
from .errors import MocondgError, UnknownProblem
from .registry import canonical_name, get_problem, problem_names
from .robust import RobustConfig, make_robust
from .solvers import SolverOptions, estimate_constants, make_rule, run_condg, run_proxgrad

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        out.append(part if part == "random" else float(part))
    return out


def _common(p: argparse.ArgumentParser, problem_required: bool) -> None:
    p.add_argument("--problem", required=problem_required,
                   help="registry name" + ("" if problem_required else "s, comma separated"))
    p.add_argument("--n", type=int, default=None, help="dimension for problems with variable n")
    p.add_argument("--robust", action="store_true", default=None,
                   help="attach the seeded polyhedral uncertainty term")
    p.add_argument("--delta-bar", default=None,
                   help="uncertainty level in [0.02, 0.10] or 'random' (comma list for bench/frontier)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rule", choices=("armijo", "adaptive", "diminishing"), default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--omega1", type=float, default=None)
    p.add_argument("--omega2", type=float, default=None)
    p.add_argument("--L", type=float, default=None, help="Lipschitz constant for the adaptive rule")
    p.add_argument("--max-iter", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mocondg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver from one start")
    _common(p, True)
    p.add_argument("--method", choices=("condg", "proxgrad"), default="condg")
    p.add_argument("--x0", default=None, help="comma separated start; default is a seeded box point")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default=None, help="directory for trace.csv and trace.json")

    for name, helptext in (("bench", "multistart benchmark with profiles"),
                           ("frontier", "budgeted runs for frontier plots and metrics")):
        p = sub.add_parser(name, help=helptext)
        _common(p, False)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--solvers", default=None, help="comma list from CondG,ProxGrad")
        p.add_argument("--starts", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--no-resume", action="store_true")
        p.add_argument("--out", default="mocondg-out", help="output directory")
        if name == "frontier":
            p.add_argument("--frontier-seconds", type=float, default=None)
            p.add_argument("--frontier-starts", type=int, default=None)

    p = sub.add_parser("constants", help="estimate rho, L_G, L, Omega and gamma")
    _common(p, True)
    p.add_argument("--starts", type=int, default=10, help="runs pooled for the f_inf estimate")

    p = sub.add_parser("report", help="rebuild report files from a results directory")
    p.add_argument("--out", required=True, help="directory holding results/")
    return parser


def _problem(args):
    base = get_problem(args.problem, args.n)
    if not args.robust:
        return base
    rc = RobustConfig(seed=args.seed or 0,
                      delta_bar=_floats(args.delta_bar)[0] if args.delta_bar else "random")
    return make_robust(base, rc)


def _rule(args):
    return make_rule(args.rule or "armijo", args.zeta if args.zeta is not None else 1e-4,
                     args.omega1 if args.omega1 is not None else 0.05,
                     args.omega2 if args.omega2 is not None else 0.95, args.L)


def cmd_solve(args) -> int:
    problem = _problem(args)
    if args.x0 is not None:
        x0 = np.array([float(v) for v in args.x0.split(",")])
    else:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed or 0, 1]))
        x0 = problem.box.sample(rng, 1)[0]
    options = SolverOptions(max_iter=args.max_iter if args.max_iter is not None else 200,
                            mu=args.mu if args.mu is not None else 1.0, time_limit=args.time_limit)
    rule = _rule(args)
    if args.method == "condg":
        trace = run_condg(problem, x0, rule, options)
    else:
        trace = run_proxgrad(problem, x0, options.mu, options, rule)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(trace.to_csv())
        (out / "trace.json").write_text(trace.to_json(seed=args.seed, config=problem.meta.get("robust_config")))
    else:
        sys.stdout.write(trace.to_csv())
    theta_pg = trace.theta_pg_final
    pg = "n/a" if theta_pg is None else f"{abs(theta_pg):.3e}"
    print(f"{problem.name} {trace.method} {trace.stop_reason.value} iterations={trace.iterations} "
          f"f_evals={trace.counters.f_evals} |theta_PG|={pg} F={np.array2string(trace.F_final, precision=6)}")
    if trace.message:
        print(trace.message, file=sys.stderr)
    return EXIT_OK if trace.converged else EXIT_FAILURE


def _bench_config(args) -> BenchmarkConfig:
    data = {}
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.problem is not None:
        data["problems"] = [p.strip() for p in args.problem.split(",")]
    if args.solvers is not None:
        data["solvers"] = [s.strip() for s in args.solvers.split(",")]
    for flag, key in (("rule", "step_rule"), ("starts", "starts"), ("seed", "seed"),
                      ("robust", "robust"), ("jobs", "jobs")):
        if getattr(args, flag) is not None:
            data[key] = getattr(args, flag)
    if args.delta_bar is not None:
        data["delta_bar"] = _floats(args.delta_bar)
    params = dict(data.get("params", {}))
    for key in ("zeta", "omega1", "omega2", "mu", "L"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    if args.max_iter is not None:
        params["max_iter"] = args.max_iter
    data["params"] = params
    if args.n is not None:
        data["dims"] = {p: args.n for p in data.get("problems", [])}
    budgets = dict(data.get("budgets", {}))
    for key in ("frontier_seconds", "frontier_starts"):
        if getattr(args, key, None) is not None:
            budgets[key] = getattr(args, key)
    data["budgets"] = budgets
    data["problems"] = [canonical_name(p) for p in data.get("problems", problem_names())]
    return BenchmarkConfig.from_dict(data)


def cmd_bench(args, frontier: bool = False) -> int:
    from .report import emit_report

    config = _bench_config(args)
    out = Path(args.out)
    if frontier:
        result = run_frontier(config, out / "results")
    else:
        result = run_benchmark(config, out / "results", resume=not args.no_resume)
    emit_report(result, out / "report")
    rates = ", ".join(f"{s} {result.success_rate(s):.1%}" for s in result.solvers())
    print(f"{len(result.records)} instances; success: {rates}; report in {out / 'report'}")
    return EXIT_OK


def cmd_constants(args) -> int:
    problem = _problem(args)
    rule = _rule(args)
    x0s = starts_for(BenchmarkConfig(problems=[problem.name], seed=args.seed or 0), problem,
                     max(args.starts, 1))
    pool = []
    for x0 in x0s:
        trace = run_condg(problem, x0, rule, SolverOptions(max_iter=args.max_iter or 200))
        pool.extend(trace.F_sequence())
    est = estimate_constants(problem, rule, x0s[0], pool, seed=args.seed or 0)
    print(json.dumps(est.to_dict() | {"problem": problem.name, "pool_runs": len(x0s)}, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import emit_report

    out = Path(args.out)
    result = load_result(out / "results")
    files = emit_report(result, out / "report")
    print(f"wrote {len(files)} files to {out / 'report'}")
    return EXIT_OK


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command in ("bench", "frontier"):
            return cmd_bench(args, frontier=args.command == "frontier")
        if args.command == "constants":
            return cmd_constants(args)
        return cmd_report(args)
    except (UnknownProblem, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        parser.print_usage(sys.stderr)
        msg = exc.args[0] if isinstance(exc, UnknownProblem) and exc.args else exc
        print(f"mocondg: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except MocondgError as exc:
        print(f"mocondg: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run_cli())

