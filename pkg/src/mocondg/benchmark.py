"""Multistart benchmark runner and frontier assembly.

An instance is one (problem, delta_bar, solver, start) tuple. Every instance
writes its own files under ``results/instances``; only the coordinating
process writes ``results/manifest.json``, so concurrent runs never share a
file. A manifest whose config matches is resumed: finished instances are
loaded rather than rerun.
"""

from __future__ import annotations

import concurrent.futures as cf
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .metrics import FrontierApproximation, nondominated_mask, performance_profile, purity, spread_metrics
from .errors import UndefinedMetric
from .problems import BoxDomain, CompositeProblem
from .registry import get_problem, problem_names
from .robust import PRNG_VERSION, RobustConfig, make_robust, resolve_delta_bar
from .solvers import Armijo, SolverOptions, SolverTrace, StopReason, make_rule, run_condg, run_proxgrad

SOLVERS = ("CondG", "ProxGrad")
MEASURES = ("iterations", "f_evals")


def generate_starts(box: BoxDomain, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. uniform points of the box, reproducible from ``seed``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    return box.sample(rng, count)


def problem_seed(seed: int, name: str) -> int:
    """Seed for one problem's starts and uncertainty sets, derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), *name.encode()])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class Budgets:
    """``run_seconds`` caps one solver run; the frontier mode runs starts per
    (problem, solver) until ``frontier_seconds`` or ``frontier_starts`` is used up."""

    run_seconds: float | None = None
    frontier_seconds: float = 10.0
    frontier_starts: int = 50


_PARAM_KEYS = ("zeta", "omega1", "omega2", "mu", "max_iter", "L")


@dataclass
class BenchmarkConfig:
    problems: list[str] = field(default_factory=problem_names)
    solvers: list[str] = field(default_factory=lambda: list(SOLVERS))
    step_rule: str = "armijo"
    params: dict = field(default_factory=dict)
    starts: int = 100
    seed: int = 0
    robust: bool = True
    delta_bar: list = field(default_factory=lambda: ["random"])
    per_instance: bool = False
    dims: dict = field(default_factory=dict)
    budgets: Budgets = field(default_factory=Budgets)
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.budgets, dict):
            self.budgets = Budgets(**self.budgets)
        if not isinstance(self.delta_bar, (list, tuple)):
            self.delta_bar = [self.delta_bar]
        self.delta_bar = list(self.delta_bar)
        self.problems = list(self.problems)
        self.solvers = list(self.solvers)
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ValueError(f"unknown solvers {sorted(unknown)}; choose from {SOLVERS}")
        bad = set(self.params) - set(_PARAM_KEYS)
        if bad:
            raise ValueError(f"unknown params {sorted(bad)}")
        if self.starts < 1 or self.jobs < 1:
            raise ValueError("starts and jobs must be at least 1")
        self.rule()  # validates step_rule and its parameters
        for db in self.delta_bar:
            RobustConfig(delta_bar=db)

    def rule(self):
        p = self.params
        return make_rule(self.step_rule, p.get("zeta", 1e-4), p.get("omega1", 0.05),
                         p.get("omega2", 0.95), p.get("L"))

    def options(self) -> SolverOptions:
        return SolverOptions(max_iter=int(self.params.get("max_iter", 200)),
                             mu=float(self.params.get("mu", 1.0)),
                             time_limit=self.budgets.run_seconds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")  # execution detail, not part of the experiment
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "BenchmarkConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class InstanceKey:
    problem: str
    delta_bar: object
    solver: str
    start: int

    @property
    def id(self) -> str:
        db = self.delta_bar if isinstance(self.delta_bar, str) else f"{float(self.delta_bar):g}"
        return f"{self.problem}_d{db}_{self.solver}_{self.start:03d}"


def instance_keys(config: BenchmarkConfig, starts: int | None = None) -> list[InstanceKey]:
    count = config.starts if starts is None else starts
    return [InstanceKey(p, db, s, i) for p in config.problems for db in config.delta_bar
            for s in config.solvers for i in range(count)]


_PROBLEM_CACHE: dict = {}


def build_instance_problem(config: BenchmarkConfig, name: str, delta_bar, start: int) -> CompositeProblem:
    base_key = (name, config.dims.get(name))
    if base_key not in _PROBLEM_CACHE:
        _PROBLEM_CACHE[base_key] = get_problem(name, config.dims.get(name))
    base = _PROBLEM_CACHE[base_key]
    if not config.robust:
        return base
    rc = RobustConfig(seed=problem_seed(config.seed, base.name), delta_bar=delta_bar,
                      per_instance=config.per_instance).with_instance(start)
    key = (base_key, json.dumps(rc.to_dict(), sort_keys=True))
    if key not in _PROBLEM_CACHE:
        _PROBLEM_CACHE[key] = make_robust(base, rc)
    return _PROBLEM_CACHE[key]


def starts_for(config: BenchmarkConfig, problem: CompositeProblem, count: int) -> np.ndarray:
    return generate_starts(problem.box, count, problem_seed(config.seed, problem.name))


def run_single(config: BenchmarkConfig, key: InstanceKey, starts: int | None = None) -> SolverTrace:
    problem = build_instance_problem(config, key.problem, key.delta_bar, key.start)
    x0 = starts_for(config, problem, starts or config.starts)[key.start]
    options = config.options()
    if key.solver == "CondG":
        return run_condg(problem, x0, config.rule(), options)
    rule = config.rule()
    rule = rule if isinstance(rule, Armijo) else Armijo(**{k: config.params[k] for k in
                                                          ("zeta", "omega1", "omega2")
                                                          if k in config.params})
    return run_proxgrad(problem, x0, options.mu, options, rule)


def summarize(key: InstanceKey, trace: SolverTrace, problem: CompositeProblem | None = None) -> dict:
    """Deterministic per-instance record; wall-clock time lives under ``metadata``."""
    delta_bar = key.delta_bar
    if problem is not None and "delta_bar" in problem.meta:
        delta_bar = problem.meta["delta_bar"]
    return {
        "id": key.id, "problem": key.problem, "solver": key.solver, "start": key.start,
        "delta_bar_setting": key.delta_bar, "delta_bar": delta_bar,
        "success": trace.stop_reason is StopReason.CONVERGED
        or trace.stop_reason is StopReason.CRITICAL_AT_START,
        "stop_reason": trace.stop_reason.value, "stop_detail": trace.stop_detail,
        "message": trace.message, "iterations": trace.iterations,
        **trace.counters.as_dict(),
        "theta_final": trace.theta_final, "theta_pg_final": trace.theta_pg_final,
        "x0": trace.x0.tolist(), "x_final": trace.x_final.tolist(), "F_final": trace.F_final.tolist(),
        "metadata": {"seconds": trace.seconds},
    }


def _execute(config_dict: dict, key: InstanceKey, out_dir: str | None, starts: int | None) -> dict:
    config = BenchmarkConfig.from_dict(config_dict)
    trace = run_single(config, key, starts)
    problem = build_instance_problem(config, key.problem, key.delta_bar, key.start)
    record = summarize(key, trace, problem)
    if out_dir is not None:
        inst = Path(out_dir) / "instances"
        inst.mkdir(parents=True, exist_ok=True)
        (inst / f"{key.id}.csv").write_text(trace.to_csv(timing=False))
        _write_json(inst / f"{key.id}.json", record)
    return record


def _write_json(path: Path, data) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    records: list[dict]
    frontier_budget: dict = field(default_factory=dict)

    # ------------------------------------------------------------- outcomes

    def solvers(self) -> list[str]:
        return [s for s in self.config.solvers if any(r["solver"] == s for r in self.records)]

    def success_rate(self, solver: str) -> float:
        rows = [r["success"] for r in self.records if r["solver"] == solver]
        return float(np.mean(rows)) if rows else float("nan")

    def success_matrix(self) -> dict[str, dict[str, list[bool]]]:
        """``{problem: {solver: [success per start]}}`` in start order."""
        out: dict = {}
        for r in self.records:
            out.setdefault(r["problem"], {}).setdefault(r["solver"], []).append(bool(r["success"]))
        return out

    def cost_matrix(self, measure: str = "iterations") -> tuple[np.ndarray, list[str], list[tuple]]:
        """Instances x solvers costs; failures are ``inf``.

        Zero-iteration successes (critical starts) cost 1 so every ratio is defined.
        """
        if measure not in MEASURES + ("seconds",):
            raise ValueError(f"unknown measure {measure!r}")
        solvers = self.solvers()
        rows: dict[tuple, dict] = {}
        for r in self.records:
            key = (r["problem"], str(r["delta_bar_setting"]), r["start"])
            cost = r["metadata"]["seconds"] if measure == "seconds" else max(r[measure], 1)
            rows.setdefault(key, {})[r["solver"]] = cost if r["success"] else np.inf
        keys = sorted(rows)
        C = np.array([[rows[k].get(s, np.inf) for s in solvers] for k in keys], dtype=float)
        return C.reshape(len(keys), len(solvers)), solvers, keys

    def profiles(self, measure: str = "iterations"):
        C, solvers, _ = self.cost_matrix(measure)
        if C.size == 0:
            return {}
        return performance_profile(C, solvers)

    # -------------------------------------------------------------- frontiers

    def frontier_points(self, problem: str, delta_bar=None) -> dict[str, np.ndarray]:
        out: dict[str, list] = {}
        for r in self.records:
            if r["problem"] != problem:
                continue
            if delta_bar is not None and str(r["delta_bar_setting"]) != str(delta_bar):
                continue
            F = np.asarray(r["F_final"], dtype=float)
            if np.all(np.isfinite(F)):
                out.setdefault(r["solver"], []).append(F)
        return {s: np.array(v) for s, v in out.items()}

    def frontier(self, problem: str, delta_bar=None) -> FrontierApproximation:
        pts, solvers, ids = [], [], []
        for r in self.records:
            if r["problem"] == problem and (delta_bar is None
                                            or str(r["delta_bar_setting"]) == str(delta_bar)):
                pts.append(r["F_final"])
                solvers.append(r["solver"])
                ids.append(r["id"])
        return FrontierApproximation.build(np.array(pts, dtype=float).reshape(len(pts), -1), solvers, ids)

    def frontier_metrics(self) -> dict:
        """Purity and spread per problem and delta_bar setting, per solver.

        Spread uses the extremes of the combined frontier of all solvers;
        a missing value means the metric is undefined for that solver.
        """
        out = {}
        for problem in self.config.problems:
            for db in self.config.delta_bar:
                pts = self.frontier_points(problem, db)
                if not pts:
                    continue
                entry: dict = {"purity": {}, "gamma": {}, "delta": {}}
                union = np.vstack(list(pts.values()))
                ref = union[nondominated_mask(union)]
                extremes = np.vstack([ref.min(axis=0), ref.max(axis=0)])
                if len(pts) >= 2:
                    try:
                        entry["purity"] = purity(pts)
                    except UndefinedMetric:
                        entry["purity"] = {}
                for s, P in pts.items():
                    own = P[nondominated_mask(P)]
                    try:
                        g, d = spread_metrics(own, extremes)
                    except (UndefinedMetric, ValueError):
                        continue
                    entry["gamma"][s], entry["delta"][s] = g, d
                out[f"{problem}|{db}"] = entry
        return out

    # ------------------------------------------------------------- summaries

    def summary(self) -> dict:
        per_problem = {}
        for problem, by_solver in self.success_matrix().items():
            per_problem[problem] = {s: float(np.mean(v)) for s, v in by_solver.items()}
        profiles = {}
        for measure in MEASURES:
            curves = self.profiles(measure)
            profiles[measure] = {s: {"efficiency": c.efficiency, "robustness": c.robustness}
                                 for s, c in curves.items()}
        return {
            "solver_version": __version__, "prng": PRNG_VERSION,
            "config": self.config.to_dict(), "instances": len(self.records),
            "success_rate": {s: self.success_rate(s) for s in self.solvers()},
            "success_by_problem": per_problem, "profiles": profiles,
            "frontier_metrics": self.frontier_metrics(), "frontier_budget": self.frontier_budget,
        }


def _load_manifest(out: Path) -> dict | None:
    path = out / "manifest.json"
    if not path.exists():
        return None
    with open(path) as fh:
        return json.load(fh)


def _manifest(config: BenchmarkConfig, keys: Sequence[InstanceKey], done: dict, mode: str,
              extra: dict | None = None) -> dict:
    return {
        "mode": mode, "solver_version": __version__, "prng": PRNG_VERSION,
        "config": config.to_dict(),
        "instances": [{"id": k.id, "problem": k.problem, "solver": k.solver, "start": k.start,
                       "delta_bar": k.delta_bar, "status": "done" if k.id in done else "pending"}
                      for k in keys],
        **(extra or {}),
        "metadata": {"updated": time.strftime("%Y-%m-%dT%H:%M:%S")},
    }


def _resume(out: Path | None, config: BenchmarkConfig, mode: str) -> dict[str, dict]:
    if out is None:
        return {}
    old = _load_manifest(out)
    if old is None or old.get("config") != json.loads(json.dumps(config.to_dict())) \
            or old.get("mode") != mode:
        return {}
    done = {}
    for item in old["instances"]:
        path = out / "instances" / f"{item['id']}.json"
        if item["status"] == "done" and path.exists():
            with open(path) as fh:
                done[item["id"]] = json.load(fh)
    return done


def _run_keys(config: BenchmarkConfig, keys: Sequence[InstanceKey], out: Path | None,
              done: dict, mode: str, starts: int | None,
              progress: Callable[[dict], None] | None) -> dict:
    pending = [k for k in keys if k.id not in done]
    out_str = None if out is None else str(out)
    cfg = config.to_dict()

    def finish(record):
        done[record["id"]] = record
        if out is not None:
            _write_json(out / "manifest.json", _manifest(config, keys, done, mode))
        if progress is not None:
            progress(record)

    try:
        if config.jobs == 1 or len(pending) <= 1:
            for k in pending:
                finish(_execute(cfg, k, out_str, starts))
        else:
            with cf.ProcessPoolExecutor(max_workers=config.jobs) as pool:
                futures = [pool.submit(_execute, cfg, k, out_str, starts) for k in pending]
                for fut in cf.as_completed(futures):
                    finish(fut.result())
    finally:
        if out is not None:
            _write_json(out / "manifest.json", _manifest(config, keys, done, mode))
    return done


def run_benchmark(config: BenchmarkConfig, out_dir=None, resume: bool = True,
                  progress: Callable[[dict], None] | None = None) -> BenchmarkResult:
    """Run every (problem, delta_bar, solver, start) instance.

    With ``out_dir`` set, traces go to ``out_dir/instances`` and the manifest
    to ``out_dir/manifest.json``; an interrupted run leaves a manifest with
    pending entries that a rerun with the same config picks up.
    """
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    keys = instance_keys(config)
    done = _resume(out, config, "benchmark") if resume else {}
    done = _run_keys(config, keys, out, done, "benchmark", None, progress)
    return BenchmarkResult(config, [done[k.id] for k in keys])


def _frontier_group(config_dict: dict, problem: str, delta_bar, solver: str,
                    out_dir: str | None) -> tuple[list[dict], str]:
    config = BenchmarkConfig.from_dict(config_dict)
    budget = config.budgets
    records = []
    t0 = time.perf_counter()
    fired = "starts"
    for i in range(budget.frontier_starts):
        if time.perf_counter() - t0 >= budget.frontier_seconds:
            fired = "seconds"
            break
        key = InstanceKey(problem, delta_bar, solver, i)
        records.append(_execute(config_dict, key, out_dir, budget.frontier_starts))
    return records, fired


def run_frontier(config: BenchmarkConfig, out_dir=None,
                 progress: Callable[[dict], None] | None = None) -> BenchmarkResult:
    """Frontier mode: per (problem, delta_bar, solver) run starts until the
    budget (``frontier_seconds`` or ``frontier_starts``) is spent.

    Starts are drawn for ``frontier_starts`` points so every solver sees the
    same sequence; a time budget makes the number of runs machine dependent.
    """
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    cfg = config.to_dict()
    out_str = None if out is None else str(out)
    groups = [(p, db, s) for p in config.problems for db in config.delta_bar for s in config.solvers]
    results: dict[tuple, tuple] = {}
    if config.jobs == 1 or len(groups) <= 1:
        for g in groups:
            results[g] = _frontier_group(cfg, *g, out_str)
            if progress is not None:
                for r in results[g][0]:
                    progress(r)
    else:
        with cf.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futs = {pool.submit(_frontier_group, cfg, *g, out_str): g for g in groups}
            for fut in cf.as_completed(futs):
                results[futs[fut]] = fut.result()
    records = [r for g in groups for r in results[g][0]]
    fired = {f"{p}|{db}|{s}": results[(p, db, s)][1] for p, db, s in groups}
    keys = [InstanceKey(r["problem"], r["delta_bar_setting"], r["solver"], r["start"]) for r in records]
    if out is not None:
        done = {r["id"]: r for r in records}
        _write_json(out / "manifest.json",
                    _manifest(config, keys, done, "frontier", {"budget_fired": fired}))
    return BenchmarkResult(config, records, fired)


def load_result(out_dir) -> BenchmarkResult:
    """Rebuild a result from a results directory (finished instances only)."""
    out = Path(out_dir)
    manifest = _load_manifest(out)
    if manifest is None:
        raise FileNotFoundError(f"no manifest.json in {out}")
    config = BenchmarkConfig.from_dict(manifest["config"])
    records = []
    for item in manifest["instances"]:
        path = out / "instances" / f"{item['id']}.json"
        if item["status"] == "done" and path.exists():
            with open(path) as fh:
                records.append(json.load(fh))
    return BenchmarkResult(config, records, manifest.get("budget_fired", {}))


def delta_bar_value(config: BenchmarkConfig, problem: str, setting) -> float:
    """Numeric delta_bar used for ``problem`` under ``setting``."""
    return resolve_delta_bar(RobustConfig(seed=problem_seed(config.seed, problem), delta_bar=setting))


def iter_traces(config: BenchmarkConfig, keys: Iterable[InstanceKey]):
    """Full traces (with iteration records) for the given instances, run in-process."""
    for key in keys:
        yield key, run_single(config, key)
