"""Dense bounded-variable primal simplex.

Solves

    min  c @ x
    s.t. A[i] @ x  (<= | == | >=)  b[i]
         lb <= x <= ub

with a two-phase method on an explicit tableau. Variables may have infinite
bounds on either side; free variables are kept nonbasic at zero until they
enter. Pricing is Dantzig's rule, switching to Bland's rule once a phase has
run for ``3 * (n + rows)`` iterations, which rules out cycling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
OPT_TOL = 1e-9
REFACTOR_EVERY = 60
# tableau entries above which "auto" hands the LP to HiGHS
AUTO_SIZE = 5_000

SENSES = ("<=", "==", ">=")


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """A linear program with tagged constraint rows and box bounds."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.senses = tuple(self.senses)
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        rows = self.A.shape[0]
        if self.b.size != rows or len(self.senses) != rows:
            raise ValueError("A, b and senses disagree on the number of rows")
        bad = [s for s in self.senses if s not in SENSES]
        if bad:
            raise ValueError(f"unknown constraint sense {bad[0]!r}")
        if np.any(self.lb > self.ub):
            raise ValueError("lb > ub for some variable")
        for arr in (self.c, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("c, A and b must be finite")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bounds must allow a finite value")

    @classmethod
    def from_blocks(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                    A_ge=None, b_ge=None, lb=0.0, ub=np.inf):
        """Assemble from separate ``<=``, ``==`` and ``>=`` blocks."""
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        blocks, rhs, senses = [], [], []
        for A, b, s in ((A_ub, b_ub, "<="), (A_eq, b_eq, "=="), (A_ge, b_ge, ">=")):
            if A is None:
                continue
            A = np.asarray(A, dtype=float).reshape(-1, n)
            blocks.append(A)
            rhs.append(np.asarray(b, dtype=float).ravel())
            senses += [s] * A.shape[0]
        A = np.vstack(blocks) if blocks else np.zeros((0, n))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        return cls(c, A, tuple(senses), b, lb, ub)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    value: float = np.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_value: float = np.nan
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Working state of the bounded simplex over equality rows ``M x = rhs``."""

    def __init__(self, M, rhs, lo, hi, basis, xval):
        self.M = M
        self.rhs = rhs
        self.lo = lo
        self.hi = hi
        self.basis = basis
        self.x = xval
        self.refactor()

    def refactor(self):
        Bmat = self.M[:, self.basis]
        try:
            self.T = np.linalg.solve(Bmat, self.M)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis matrix") from exc
        nonbasic = np.ones(self.M.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        resid = self.rhs - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(Bmat, resid)
        self.T[:, self.basis] = np.eye(len(self.basis))
        self.pivots_since_refactor = 0

    def run(self, cost, allowed, max_iter, bland_after):
        """Minimize ``cost @ x``. Returns ('optimal'|'unbounded', iterations)."""
        rows, ncols = self.T.shape
        is_basic = np.zeros(ncols, dtype=bool)
        is_basic[self.basis] = True
        it = 0
        while True:
            if it >= max_iter:
                raise NumericalFailure(f"simplex iteration limit {max_iter} reached")
            bland = it >= bland_after
            d = cost - cost[self.basis] @ self.T
            # candidates: nonbasic columns that improve in an admissible direction
            can_up = allowed & ~is_basic & (self.x < self.hi) & (d < -OPT_TOL)
            can_dn = allowed & ~is_basic & (self.x > self.lo) & (d > OPT_TOL)
            cand = np.flatnonzero(can_up | can_dn)
            if cand.size == 0:
                return "optimal", it
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if can_up[j] else -1.0

            col = self.T[:, j] * direction  # x_B changes by -t * col
            t_best = self.hi[j] - self.lo[j]
            leave = -1
            leave_to = 0.0
            xb = self.x[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            dec = col > PIVOT_TOL
            inc = col < -PIVOT_TOL
            ratios = np.full(rows, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xb[dec] - lob[dec]) / col[dec]
                ratios[inc] = (hib[inc] - xb[inc]) / -col[inc]
            ratios = np.maximum(ratios, 0.0)
            r_min = ratios.min() if rows else np.inf
            if r_min < t_best:
                ties = np.flatnonzero(ratios <= r_min + 1e-12 * max(1.0, r_min))
                if bland:
                    r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(col[ties]))])
                t_best = ratios[r]
                leave = r
                leave_to = self.lo[self.basis[r]] if dec[r] else self.hi[self.basis[r]]
            if not np.isfinite(t_best):
                return "unbounded", it

            if leave < 0:
                # bound flip: land exactly on the opposite bound
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
            else:
                self.x[j] += direction * t_best
            self.x[self.basis] = xb - t_best * col
            if leave >= 0:
                piv = self.T[leave, j]
                if abs(piv) < PIVOT_TOL:
                    raise NumericalFailure("pivot below tolerance")
                out = self.basis[leave]
                self.x[out] = leave_to
                prow = self.T[leave] / piv
                self.T -= np.outer(self.T[:, j], prow)
                self.T[leave] = prow
                self.basis[leave] = j
                is_basic[out] = False
                is_basic[j] = True
                self.pivots_since_refactor += 1
                if self.pivots_since_refactor >= REFACTOR_EVERY:
                    self.refactor()
            it += 1


def solve_lp(lp: LinearProgram, method: str = "auto", max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``.

    ``method`` is ``"simplex"`` (the tableau code in this module), ``"highs"``
    (scipy's HiGHS dual simplex) or ``"auto"``, which uses the tableau code up
    to ``AUTO_SIZE`` tableau entries and HiGHS above.  Both return the same
    ``LpSolution`` fields.  Raises ``NumericalFailure`` when a solve breaks
    down.
    """
    if method == "auto":
        method = "simplex" if (lp.n + lp.rows) * max(lp.rows, 1) <= AUTO_SIZE else "highs"
    if method == "highs":
        return _solve_highs(lp)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    return _solve_simplex(lp, max_iter)


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    le = [i for i, s in enumerate(lp.senses) if s == "<="]
    ge = [i for i, s in enumerate(lp.senses) if s == ">="]
    eq = [i for i, s in enumerate(lp.senses) if s == "=="]
    ub_rows = le + ge
    sign = np.array([1.0] * len(le) + [-1.0] * len(ge))
    A_ub = lp.A[ub_rows] * sign[:, None] if ub_rows else None
    b_ub = lp.b[ub_rows] * sign if ub_rows else None
    A_eq = lp.A[eq] if eq else None
    b_eq = lp.b[eq] if eq else None
    bounds = [(None if np.isinf(l) else l, None if np.isinf(u) else u) for l, u in zip(lp.lb, lp.ub)]
    res = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options={"primal_feasibility_tolerance": 1e-9,
                                              "dual_feasibility_tolerance": 1e-9})
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, iterations=iters, info={"backend": "highs"})
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, iterations=iters, info={"backend": "highs"})
    if res.status != 0:
        raise NumericalFailure(f"HiGHS stopped with status {res.status}: {res.message}")
    y = np.zeros(lp.rows)
    if ub_rows:
        y[ub_rows] = np.asarray(res.ineqlin.marginals) * sign
    if eq:
        y[eq] = np.asarray(res.eqlin.marginals)
    x = np.minimum(np.maximum(np.asarray(res.x, dtype=float), lp.lb), lp.ub)
    sol = _finish(lp, x, y, np.ones(lp.rows), iters)
    sol.info["backend"] = "highs"
    return sol


def _solve_simplex(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    n, rows = lp.n, lp.rows
    lb, ub = lp.lb, lp.ub

    # row equilibration; duals are mapped back at the end
    scale = np.ones(rows)
    if rows:
        mx = np.abs(lp.A).max(axis=1)
        scale = np.where(mx > 0, 1.0 / np.where(mx > 0, mx, 1.0), 1.0)
    A = lp.A * scale[:, None]
    b = lp.b * scale

    # slacks: A x + s = b with s >= 0 for '<=' rows, s <= 0 for '>=' rows
    slack_rows = [i for i, s in enumerate(lp.senses) if s != "=="]
    ns = len(slack_rows)
    S = np.zeros((rows, ns))
    s_lo = np.zeros(ns)
    s_hi = np.zeros(ns)
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0
        if lp.senses[i] == "<=":
            s_lo[k], s_hi[k] = 0.0, np.inf
        else:
            s_lo[k], s_hi[k] = -np.inf, 0.0

    # starting nonbasic values for structural columns
    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = b - A @ x0

    # basis: a slack where its sign admits the residual, else an artificial
    basis = []
    art_cols = []
    art_sign = []
    s_val = np.zeros(ns)
    slack_of_row = {i: k for k, i in enumerate(slack_rows)}
    for i in range(rows):
        k = slack_of_row.get(i)
        if k is not None and s_lo[k] <= resid[i] <= s_hi[k]:
            basis.append(n + k)
            s_val[k] = resid[i]
        else:
            art_cols.append(i)
            art_sign.append(1.0 if resid[i] >= 0 else -1.0)
    na = len(art_cols)
    Art = np.zeros((rows, na))
    for k, (i, sg) in enumerate(zip(art_cols, art_sign)):
        Art[i, k] = sg
    basis_by_row = {}
    for col in basis:
        basis_by_row[slack_rows[col - n]] = col
    for k, i in enumerate(art_cols):
        basis_by_row[i] = n + ns + k
    basis = [basis_by_row[i] for i in range(rows)]

    M = np.hstack([A, S, Art])
    lo = np.concatenate([lb, s_lo, np.zeros(na)])
    hi = np.concatenate([ub, s_hi, np.full(na, np.inf)])
    xval = np.concatenate([x0, s_val, np.abs(resid[art_cols]) if na else np.zeros(0)])
    ncols = M.shape[1]

    if max_iter is None:
        max_iter = 50 * (ncols + rows) + 1000
    bland_after = 3 * (n + rows)

    if rows == 0:
        # pure bound-constrained problem: each variable sits at its best bound
        x = np.where(lp.c > 0, lb, np.where(lp.c < 0, ub, x0))
        if not np.all(np.isfinite(x)):
            return LpSolution(LpStatus.UNBOUNDED, iterations=0)
        return _finish(lp, x, np.zeros(0), np.ones(0), 0)

    tab = _Tableau(M, b, lo, hi, basis, xval)
    iters = 0
    if na:
        cost1 = np.zeros(ncols)
        cost1[n + ns:] = 1.0
        allowed = np.ones(ncols, dtype=bool)
        status, it = tab.run(cost1, allowed, max_iter, bland_after)
        iters += it
        tab.refactor()
        infeas = tab.x[n + ns:].sum()
        if infeas > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return LpSolution(LpStatus.INFEASIBLE, iterations=iters,
                              info={"phase1_residual": float(infeas)})
        # artificials are frozen at zero from here on
        tab.hi[n + ns:] = 0.0
        tab.x[n + ns:] = np.minimum(tab.x[n + ns:], 0.0)
        tab.x[n + ns:] = np.maximum(tab.x[n + ns:], 0.0)
    cost2 = np.concatenate([lp.c, np.zeros(ns + na)])
    allowed = np.ones(ncols, dtype=bool)
    allowed[n + ns:] = False
    status, it = tab.run(cost2, allowed, max_iter, bland_after)
    iters += it
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=iters)
    tab.refactor()

    x = tab.x[:n].copy()
    # clamp roundoff against the original bounds
    x = np.minimum(np.maximum(x, lb), ub)
    Bmat = M[:, tab.basis]
    y_scaled = np.linalg.solve(Bmat.T, cost2[tab.basis])
    return _finish(lp, x, y_scaled, scale, iters)


def _finish(lp: LinearProgram, x, y_scaled, scale, iters) -> LpSolution:
    y = y_scaled * scale
    red = lp.c - lp.A.T @ y
    value = float(lp.c @ x)
    # dual objective: b @ y plus the bound terms paid by the reduced costs
    bound_term = np.where(red > 0, np.where(np.isfinite(lp.lb), lp.lb, 0.0),
                          np.where(np.isfinite(lp.ub), lp.ub, 0.0)) * red
    dual_value = float(lp.b @ y + bound_term.sum())
    return LpSolution(LpStatus.OPTIMAL, x=x, value=value, duals=y,
                      reduced_costs=red, dual_value=dual_value, iterations=iters)


def primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of rows and bounds at ``x``, rows scaled by their max entry."""
    viol = [0.0]
    if lp.rows:
        ax = lp.A @ x
        s = np.maximum(np.abs(lp.A).max(axis=1), 1.0)
        for i, sense in enumerate(lp.senses):
            r = (ax[i] - lp.b[i]) / s[i]
            if sense == "<=":
                viol.append(max(r, 0.0))
            elif sense == ">=":
                viol.append(max(-r, 0.0))
            else:
                viol.append(abs(r))
    viol.append(float(np.max(np.maximum(lp.lb - x, 0.0), initial=0.0)))
    viol.append(float(np.max(np.maximum(x - lp.ub, 0.0), initial=0.0)))
    return float(max(viol))
