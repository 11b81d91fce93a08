"""Generalized conditional gradient and proximal gradient runs.

Both methods share the iteration ``x+ = x + lam * (p(x) - x)`` and the
composite stopping test: relative step ``||x^k - x^{k-1}||_inf /
max(1, ||x^{k-1}||_inf) <= 1e-4`` followed by ``|theta_PG(x^k)| <= 1e-4``.
The conditional gradient run computes ``theta_PG`` only after the step test
passes.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import __version__
from .errors import DegenerateDirection, LineSearchStall, MocondgError
from .problems import CompositeProblem, EvalCounter, evaluate, jacobian
from .subproblems import GapSolution, condg_direction, proxgrad_direction

CRITICAL_TOL = 1e-12
STOP_TOL = 1e-4
MIN_STEP = 1e-16


# ---------------------------------------------------------------- step rules

@dataclass(frozen=True)
class Armijo:
    zeta: float = 1e-4
    omega1: float = 0.05
    omega2: float = 0.95
    name: str = field(default="armijo", init=False)

    def __post_init__(self):
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if not 0 < self.omega1 < self.omega2 < 1:
            raise ValueError("need 0 < omega1 < omega2 < 1")


@dataclass(frozen=True)
class Adaptive:
    """``lam = min(1, |theta| / (L ||p - x||^2))``; ``L=None`` takes the problem's constant."""

    L: float | None = None
    name: str = field(default="adaptive", init=False)

    def __post_init__(self):
        if self.L is not None and not self.L > 0:
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class Diminishing:
    name: str = field(default="diminishing", init=False)


StepRule = Union[Armijo, Adaptive, Diminishing]


def make_rule(name: str, zeta: float = 1e-4, omega1: float = 0.05, omega2: float = 0.95,
              L: float | None = None) -> StepRule:
    name = name.lower()
    if name == "armijo":
        return Armijo(zeta, omega1, omega2)
    if name == "adaptive":
        return Adaptive(L)
    if name == "diminishing":
        return Diminishing()
    raise ValueError(f"unknown step rule {name!r}")


def rule_to_dict(rule: StepRule) -> dict:
    return asdict(rule) | {"name": rule.name}


# -------------------------------------------------------------------- traces

class StopReason(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    CRITICAL_AT_START = "CriticalAtStart"
    NUMERICAL_FAILURE = "NumericalFailure"
    TIME_LIMIT = "TimeLimit"


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    F: np.ndarray
    theta: float
    lam: float
    inner_evals: int
    subproblem_time: float


@dataclass
class SolverOptions:
    max_iter: int = 200
    stop_tol: float = STOP_TOL
    critical_tol: float = CRITICAL_TOL
    mu: float = 1.0
    time_limit: float | None = None
    lp_method: str = "auto"

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")


@dataclass
class SolverTrace:
    method: str
    problem: str
    rule: dict
    x0: np.ndarray
    records: list[IterationRecord] = field(default_factory=list)
    stop_reason: StopReason | None = None
    stop_detail: str = ""
    x_final: np.ndarray | None = None
    F_final: np.ndarray | None = None
    theta_final: float | None = None
    theta_pg_final: float | None = None
    counters: EvalCounter = field(default_factory=EvalCounter)
    seconds: float = 0.0
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.stop_reason in (StopReason.CONVERGED, StopReason.CRITICAL_AT_START)

    def F_sequence(self) -> np.ndarray:
        """``F(x^0), ..., F(x^K)`` including the final iterate."""
        rows = [r.F for r in self.records] + [self.F_final]
        return np.array(rows)

    def x_sequence(self) -> np.ndarray:
        return np.array([r.x for r in self.records] + [self.x_final])

    def totals(self) -> dict:
        return {"iterations": self.iterations, "seconds": self.seconds, **self.counters.as_dict()}

    def to_csv(self, timing: bool = True) -> str:
        """One row per iteration; ``timing=False`` drops the wall-clock column."""
        m = len(self.F_final) if self.F_final is not None else 0
        n = len(self.x0)
        head = TRACE_COLUMNS_HEAD if timing else TRACE_COLUMNS_HEAD[:-1]
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(head + [f"F{j + 1}" for j in range(m)] + [f"x{i + 1}" for i in range(n)])
        for r in self.records:
            row = [r.k, repr(float(r.lam)), repr(float(r.theta)), r.inner_evals]
            if timing:
                row.append(f"{r.subproblem_time:.6f}")
            w.writerow(row + [repr(float(v)) for v in r.F] + [repr(float(v)) for v in r.x])
        return out.getvalue()

    def to_dict(self, include_records: bool = True) -> dict:
        d = {
            "method": self.method, "problem": self.problem, "rule": self.rule,
            "x0": self.x0.tolist(), "stop_reason": self.stop_reason.value if self.stop_reason else None,
            "stop_detail": self.stop_detail, "message": self.message,
            "x_final": None if self.x_final is None else self.x_final.tolist(),
            "F_final": None if self.F_final is None else self.F_final.tolist(),
            "theta_final": self.theta_final, "theta_pg_final": self.theta_pg_final,
            "totals": self.totals(), "solver_version": __version__,
        }
        if include_records:
            d["records"] = [{"k": r.k, "lam": r.lam, "theta": r.theta, "inner_evals": r.inner_evals,
                             "subproblem_time": r.subproblem_time, "F": r.F.tolist(), "x": r.x.tolist()}
                            for r in self.records]
        return d

    def to_json(self, **extra) -> str:
        return json.dumps(self.to_dict() | extra, indent=2)


# CSV column order; objective and coordinate columns F1..Fm, x1..xn follow.
TRACE_COLUMNS_HEAD = ["k", "lambda", "theta", "inner_evals", "subproblem_time"]


# -------------------------------------------------------------- step sizes

def _slope(problem: CompositeProblem, x, d, J) -> np.ndarray:
    """Exact one-sided derivatives of each ``f_j`` at ``x`` along ``d``."""
    return J @ d + problem.nonsmooth.directional(x, d)


def armijo_search(problem: CompositeProblem, x, gap: GapSolution, zeta: float = 1e-4,
                  omega1: float = 0.05, omega2: float = 0.95, F_x=None, J=None,
                  counter: EvalCounter | None = None):
    """Backtracking with safeguarded quadratic interpolation.

    Returns ``(lam, inner_evals, F_new)``. A rejected trial ``lam`` is
    replaced by the minimizer of the quadratic through ``phi(0)``,
    ``phi'(0)`` and ``phi(lam)`` of the most violated objective (lowest index
    on ties), clamped to ``[omega1 lam, omega2 lam]``.
    """
    if not gap.theta < 0:
        raise ValueError("Armijo search needs theta < 0")
    x = np.asarray(x, dtype=float)
    d = gap.direction
    if F_x is None:
        F_x = evaluate(problem, x, counter).F
    if J is None:
        J = jacobian(problem, x, counter)
    slope = None
    decrease = zeta * abs(gap.theta)
    lam = 1.0
    evals = 0
    while True:
        F_new = evaluate(problem, problem.box.clip(x + lam * d), counter).F
        evals += 1
        excess = F_new - (F_x - decrease * lam)
        if np.all(excess <= 0):
            return lam, evals, F_new
        if slope is None:
            slope = _slope(problem, x, d, J)
        j = int(np.argmax(np.where(np.isfinite(excess), excess, np.inf)))
        phi0, dphi0, phil = F_x[j], slope[j], F_new[j]
        curv = (phil - phi0 - dphi0 * lam) / lam ** 2
        trial = -dphi0 / (2 * curv) if curv > 0 else np.nan
        if not np.isfinite(trial):
            trial = 0.5 * (omega1 + omega2) * lam
        lam = min(max(trial, omega1 * lam), omega2 * lam)
        if lam < MIN_STEP:
            raise LineSearchStall(f"step fell below {MIN_STEP:g}")


def adaptive_step(gap: GapSolution, L: float) -> float:
    if not gap.theta < 0:
        raise ValueError("adaptive step needs theta < 0")
    if not L > 0:
        raise ValueError("L must be positive")
    dd = float(gap.direction @ gap.direction)
    if math.sqrt(dd) < 1e-14:
        if gap.theta < -CRITICAL_TOL:
            raise DegenerateDirection("zero direction with negative gap")
        return 1.0
    return min(1.0, abs(gap.theta) / (L * dd))


def diminishing_step(k: int) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return 2.0 / (k + 2)


# ---------------------------------------------------------------- stopping

@dataclass(frozen=True)
class StopDecision:
    converged: bool
    ratio: float
    theta_pg: float | None


def relative_step(x_prev, x_cur) -> float:
    x_prev = np.asarray(x_prev, dtype=float)
    return float(np.abs(np.asarray(x_cur) - x_prev).max() / max(1.0, np.abs(x_prev).max()))


def check_stop(x_prev, x_cur, theta_pg_provider: Callable[[], float],
               tol: float = STOP_TOL) -> StopDecision:
    """Composite test; ``theta_pg_provider`` is only called when the step test passes."""
    ratio = relative_step(x_prev, x_cur)
    if ratio > tol:
        return StopDecision(False, ratio, None)
    theta_pg = float(theta_pg_provider())
    return StopDecision(abs(theta_pg) <= tol, ratio, theta_pg)


# -------------------------------------------------------------------- runs

def _take_step(problem, x, F, J, gap, rule, k, counter):
    if isinstance(rule, Armijo):
        return armijo_search(problem, x, gap, rule.zeta, rule.omega1, rule.omega2, F, J, counter)
    if isinstance(rule, Adaptive):
        L = rule.L if rule.L is not None else problem.smooth.L
        if L is None:
            raise ValueError("adaptive rule needs a Lipschitz constant")
        lam = adaptive_step(gap, L)
    elif isinstance(rule, Diminishing):
        lam = diminishing_step(k)
    else:
        raise TypeError(f"unsupported step rule {rule!r}")
    F_new = evaluate(problem, problem.box.clip(x + lam * gap.direction), counter).F
    return lam, 0, F_new


def _run(problem: CompositeProblem, x0, rule: StepRule, options: SolverOptions, method: str):
    options = options or SolverOptions()
    x = problem.box.check(x0).copy()
    counter = EvalCounter()
    trace = SolverTrace(method, problem.name, rule_to_dict(rule), x.copy(), counters=counter)
    t_start = time.perf_counter()
    x_prev = None
    k = 0
    try:
        F = evaluate(problem, x, counter).F
        while True:
            if options.time_limit is not None and time.perf_counter() - t_start > options.time_limit:
                trace.stop_reason = StopReason.TIME_LIMIT
                break
            J = jacobian(problem, x, counter)
            g_x = problem.nonsmooth.value(x)

            if method == "CondG":
                trace.theta_pg_final = None
            if method == "ProxGrad":
                gap = proxgrad_direction(problem, x, options.mu, counter, g_x, J)
                trace.theta_pg_final = gap.theta
                if x_prev is not None:
                    dec = check_stop(x_prev, x, lambda: gap.theta, options.stop_tol)
                    if dec.converged:
                        trace.stop_reason, trace.stop_detail = StopReason.CONVERGED, "composite-test"
                        break
            else:
                if x_prev is not None:
                    dec = check_stop(
                        x_prev, x,
                        lambda: proxgrad_direction(problem, x, options.mu, counter, g_x, J).theta,
                        options.stop_tol)
                    if dec.theta_pg is not None:
                        trace.theta_pg_final = dec.theta_pg
                    if dec.converged:
                        trace.stop_reason, trace.stop_detail = StopReason.CONVERGED, "composite-test"
                        break
                gap = condg_direction(problem, x, counter, g_x, J, options.lp_method)
            trace.theta_final = gap.theta

            if gap.theta >= -options.critical_tol:
                if k == 0:
                    trace.stop_reason = StopReason.CRITICAL_AT_START
                else:
                    trace.stop_reason, trace.stop_detail = StopReason.CONVERGED, "zero-gap"
                if trace.theta_pg_final is None:
                    trace.theta_pg_final = proxgrad_direction(problem, x, options.mu, counter, g_x, J).theta
                break
            if k >= options.max_iter:
                trace.stop_reason = StopReason.MAX_ITERATIONS
                break

            lam, inner, F_new = _take_step(problem, x, F, J, gap, rule, k, counter)
            sub_time = gap.info.get("seconds", 0.0)
            trace.records.append(IterationRecord(k, x.copy(), F.copy(), gap.theta, lam, inner, sub_time))
            x_prev, x, F = x, problem.box.clip(x + lam * gap.direction), F_new
            k += 1
    except MocondgError as exc:
        trace.stop_reason = StopReason.NUMERICAL_FAILURE
        trace.message = f"{type(exc).__name__}: {exc}"
    trace.x_final = x
    trace.F_final = evaluate(problem, x).F
    trace.seconds = time.perf_counter() - t_start
    return trace


def run_condg(problem: CompositeProblem, x0, rule: StepRule | None = None,
              options: SolverOptions | None = None) -> SolverTrace:
    """Generalized conditional gradient method (Armijo, adaptive or diminishing steps)."""
    return _run(problem, x0, rule or Armijo(), options or SolverOptions(), "CondG")


def run_proxgrad(problem: CompositeProblem, x0, mu: float = 1.0, options: SolverOptions | None = None,
                 rule: StepRule | None = None) -> SolverTrace:
    """Proximal gradient comparator with the same line search and stopping test."""
    options = options or SolverOptions()
    if mu != options.mu:
        options = SolverOptions(**(asdict(options) | {"mu": mu}))
    return _run(problem, x0, rule or Armijo(), options, "ProxGrad")


# --------------------------------------------------------------- constants

@dataclass(frozen=True)
class ConstantsEstimate:
    rho: float
    L_G: float
    L: float
    Omega: float
    gamma: float
    f_start: float | None
    f_inf: float | None
    estimated: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return asdict(self) | {"estimated": list(self.estimated)}


def sampled_grad_sup(problem: CompositeProblem, rng: np.random.Generator, samples: int = 1000,
                     safety: float = 1.1) -> float:
    """Largest gradient norm over box corners and uniform samples, times ``safety``."""
    pts = np.vstack([problem.box.vertices(limit=256, rng=rng), problem.box.sample(rng, samples)])
    best = 0.0
    for x in pts:
        best = max(best, float(np.linalg.norm(np.asarray(problem.smooth.grad(x)), axis=1).max()))
    return best * safety


def estimate_constants(problem: CompositeProblem, rule: StepRule | None = None, x0=None,
                       pool: Sequence | None = None, seed: int = 0) -> ConstantsEstimate:
    """Constants entering the step floor ``gamma`` and the complexity bounds.

    ``pool`` holds objective vectors whose smallest entry gives the estimate
    of ``f_inf``; it is flagged as an estimate.
    """
    rule = rule if isinstance(rule, Armijo) else Armijo()
    estimated = []
    if problem.smooth.grad_norm_bound is not None:
        rho = float(problem.smooth.grad_norm_bound)
    else:
        rho = sampled_grad_sup(problem, np.random.default_rng(seed))
        estimated.append("rho")
    L_G = float(problem.nonsmooth.lipschitz().max(initial=0.0))
    L = problem.smooth.L
    if L is None or problem.meta.get("lipschitz_estimated"):
        estimated.append("L")
    Omega = problem.box.diameter()
    gamma = min(1.0 / ((rho + L_G) * Omega), 2 * rule.omega1 * (1 - rule.zeta) / (L * Omega ** 2))
    f_start = None if x0 is None else float(evaluate(problem, x0).F.max())
    f_inf = None
    if pool is not None and len(pool):
        f_inf = float(np.min(np.asarray(pool, dtype=float)))
        estimated.append("f_inf")
    return ConstantsEstimate(rho, L_G, float(L), Omega, gamma, f_start, f_inf, tuple(estimated))
