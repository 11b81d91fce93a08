"""Gap functions, their minimizers and search directions.

Both subproblems are posed over ``(tau, u, w_1, ..., w_m)``. Each ``w_j``
(length 2n) is a dual certificate for the support function of ``Z_j``,
which keeps the constraints linear:

    min  tau [+ mu/2 ||u - x||^2]
    s.t. delta_j e'w_j - g_j(x) + <grad h_j(x), u - x> <= tau
         A_j' w_j = u,  w_j >= 0,  lb <= u <= ub.

For ``G = 0`` the ``w`` blocks are dropped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .lp import LinearProgram, solve_lp
from .problems import CompositeProblem, EvalCounter, jacobian
from .qp import QuadraticProgram, solve_qp

SUPPORT_AGREE_TOL = 1e-7


@dataclass(frozen=True)
class GapSolution:
    p: np.ndarray
    theta: float
    direction: np.ndarray
    kind: str
    mu: float | None = None
    info: dict = field(default_factory=dict, compare=False)


def support_value(zset, x, method: str = "auto") -> float:
    """``max <x, z>`` over ``zset`` through the dual LP ``min delta e'w, A'w = x, w >= 0``."""
    x = np.asarray(x, dtype=float).ravel()
    n = zset.n
    A = zset.A
    lp = LinearProgram(zset.b, A.T, ("==",) * n, x, np.zeros(2 * n), np.full(2 * n, np.inf))
    sol = solve_lp(lp, method=method)
    if not sol.optimal:
        raise NumericalFailure(f"support LP ended with status {sol.status.name}")
    # the row duals of the dual LP solve the primal max <x,z>, A z <= b
    z = sol.duals
    primal = float(x @ z)
    scale = max(1.0, abs(sol.value))
    if abs(primal - sol.value) > SUPPORT_AGREE_TOL * scale or not zset.contains(z, 1e-7):
        raise NumericalFailure("primal and dual support values disagree")
    return float(sol.value)


def max_form(problem: CompositeProblem, x, u, g_x=None, J=None) -> float:
    """``max_j g_j(u) - g_j(x) + <grad h_j(x), u - x>`` evaluated directly."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if g_x is None:
        g_x = problem.nonsmooth.value(x)
    if J is None:
        J = np.asarray(problem.smooth.grad(x), dtype=float)
    return float(np.max(problem.nonsmooth.value(u) - g_x + J @ (u - x)))


def _tau_bounds(problem: CompositeProblem, x, g_x, J):
    """Finite bounds on tau that no optimal point can touch.

    ``g_j >= 0`` everywhere on the box, so each constraint's left side is at
    least ``-g_j(x) + min_u <grad h_j, u - x>``; the optimum is at most 0.
    """
    lo_terms = np.minimum(J * (problem.box.lb - x), J * (problem.box.ub - x)).sum(axis=1)
    floor = float(np.max(-g_x + lo_terms))
    margin = 1.0 + 1e-3 * abs(floor)
    return floor - margin, margin


def _assemble(problem: CompositeProblem, x, g_x, J):
    """Cost vector, rows and bounds of the shared LP/QP layout."""
    n, m = problem.n, problem.m
    robust = not problem.nonsmooth.is_zero
    nw = 2 * n if robust else 0
    nvar = 1 + n + m * nw
    c = np.zeros(nvar)
    c[0] = 1.0

    A_ub = np.zeros((m, nvar))
    A_ub[:, 0] = -1.0
    A_ub[:, 1:1 + n] = J
    b_ub = J @ x
    if robust:
        b_ub = b_ub + g_x
    A_eq = np.zeros((m * n if robust else 0, nvar))
    if robust:
        for j, zset in enumerate(problem.nonsmooth.sets):
            cols = slice(1 + n + j * nw, 1 + n + (j + 1) * nw)
            A_ub[j, cols] = zset.delta
            rows = slice(j * n, (j + 1) * n)
            A_eq[rows, cols] = zset.A.T
            A_eq[rows, 1:1 + n] = -np.eye(n)

    lb = np.concatenate([[-np.inf], problem.box.lb, np.zeros(m * nw)])
    ub = np.concatenate([[np.inf], problem.box.ub, np.full(m * nw, np.inf)])
    A = np.vstack([A_ub, A_eq])
    senses = ("<=",) * m + ("==",) * A_eq.shape[0]
    b = np.concatenate([b_ub, np.zeros(A_eq.shape[0])])
    return c, A, senses, b, lb, ub


def _prepare(problem, x, counter, g_x, J):
    x = problem.box.check(x)
    if J is None:
        J = jacobian(problem, x, counter)
    if g_x is None:
        g_x = problem.nonsmooth.value(x)
    return x, np.asarray(g_x, dtype=float), np.asarray(J, dtype=float)


def condg_direction(problem: CompositeProblem, x, counter: EvalCounter | None = None,
                    g_x=None, J=None, lp_method: str = "auto") -> GapSolution:
    """Conditional gradient gap ``theta(x)`` and minimizer ``p(x)``.

    ``theta`` is the max-form objective evaluated at the returned ``p``, which
    agrees with the LP value ``tau*`` up to solver tolerance (kept in
    ``info["tau"]``).  If roundoff makes that value positive, ``p = x`` and
    ``theta = 0`` are returned instead, since ``u = x`` attains zero.
    """
    x, g_x, J = _prepare(problem, x, counter, g_x, J)
    t0 = time.perf_counter()
    c, A, senses, b, lb, ub = _assemble(problem, x, g_x, J)
    sol = solve_lp(LinearProgram(c, A, senses, b, lb, ub), method=lp_method)
    if counter is not None:
        counter.lp_solves += 1
    if not sol.optimal:
        raise NumericalFailure(f"direction LP ended with status {sol.status.name}")
    p = problem.box.clip(sol.x[1:1 + problem.n])
    theta = max_form(problem, x, p, g_x, J)
    info = {"tau": float(sol.value), "iterations": sol.iterations,
            "seconds": time.perf_counter() - t0, "backend": sol.info.get("backend", "simplex")}
    if theta > 0:
        p, theta = x.copy(), 0.0
        info["fallback"] = True
    return GapSolution(p, float(theta), p - x, "CondG", None, info)


def proxgrad_direction(problem: CompositeProblem, x, mu: float = 1.0,
                       counter: EvalCounter | None = None, g_x=None, J=None) -> GapSolution:
    """Proximal gradient gap ``theta_PG(x)``: the max-form plus ``mu/2 ||p - x||^2``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    x, g_x, J = _prepare(problem, x, counter, g_x, J)
    t0 = time.perf_counter()
    c, A, senses, b, lb, ub = _assemble(problem, x, g_x, J)
    lb[0], ub[0] = _tau_bounds(problem, x, g_x, J)
    n = problem.n
    Q = np.zeros((c.size, c.size))
    Q[1:1 + n, 1:1 + n] = mu * np.eye(n)
    c = c.copy()
    c[1:1 + n] = -mu * x
    sol = solve_qp(QuadraticProgram(Q, c, A, senses, b, lb, ub))
    if counter is not None:
        counter.qp_solves += 1
    if not sol.optimal:
        raise NumericalFailure(f"direction QP ended with status {sol.status.name}")
    p = problem.box.clip(sol.x[1:1 + n])
    step = p - x
    theta = max_form(problem, x, p, g_x, J) + 0.5 * mu * float(step @ step)
    info = {"tau": float(sol.x[0]), "value": float(sol.value + 0.5 * mu * x @ x),
            "iterations": sol.iterations, "seconds": time.perf_counter() - t0}
    if theta > 0:
        p, theta = x.copy(), 0.0
        info["fallback"] = True
    return GapSolution(p, float(theta), p - x, "ProxGrad", float(mu), info)
