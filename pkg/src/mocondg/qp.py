"""Convex quadratic programming by a primal-dual interior point method.

Solves

    min  0.5 * x @ Q @ x + c @ x
    s.t. A[i] @ x  (<= | == | >=)  b[i]
         lb <= x <= ub

with Mehrotra's predictor-corrector. Inequality rows receive a slack and all
bounds are handled by the barrier. When ``Q`` is diagonal and every variable
with zero curvature carries a finite bound, Newton systems are reduced to
normal equations; otherwise the full KKT matrix is factorized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericalFailure
from .lp import LinearProgram, solve_lp

KKT_TOL = 1e-7
IPM_TOL = 1e-10
MAX_ITER = 200
H_FLOOR = 1e-12
GONDZIO_CORRECTORS = 2
STALL_LIMIT = 6
SAFE_SIGMA = 0.2


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


@dataclass
class QuadraticProgram:
    """``min 0.5 x'Qx + c'x`` under tagged rows and bounds.

    ``Q`` must be symmetric positive semidefinite.
    """

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        if not np.allclose(self.Q, self.Q.T, atol=1e-12, rtol=0):
            raise ValueError("Q is not symmetric")
        # the constraint layout is shared with LinearProgram
        lp = LinearProgram(self.c, self.A, self.senses, self.b, self.lb, self.ub)
        self.A, self.senses, self.b, self.lb, self.ub = lp.A, lp.senses, lp.b, lp.lb, lp.ub

    @classmethod
    def from_blocks(cls, Q, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                    A_ge=None, b_ge=None, lb=-np.inf, ub=np.inf):
        lp = LinearProgram.from_blocks(c, A_ub, b_ub, A_eq, b_eq, A_ge, b_ge, lb, ub)
        return cls(Q, lp.c, lp.A, lp.senses, lp.b, lp.lb, lp.ub)

    @property
    def n(self) -> int:
        return self.c.size

    def check_psd(self, floor: float = -1e-10) -> bool:
        return bool(np.linalg.eigvalsh(self.Q).min() >= floor)

    def objective(self, x) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x)


@dataclass
class QpSolution:
    status: QpStatus
    x: np.ndarray | None = None
    value: float = np.nan
    duals: np.ndarray | None = None
    dual_value: float = np.nan
    kkt_residual: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_qp(qp: QuadraticProgram, tol: float = IPM_TOL) -> QpSolution:
    n = qp.n
    rows = qp.A.shape[0]

    # slack columns turn every row into an equality
    slack_rows = [i for i, s in enumerate(qp.senses) if s != "=="]
    ns = len(slack_rows)
    A = np.zeros((rows, n + ns))
    A[:, :n] = qp.A
    lo = np.concatenate([qp.lb, np.zeros(ns)])
    hi = np.concatenate([qp.ub, np.zeros(ns)])
    for k, i in enumerate(slack_rows):
        A[i, n + k] = 1.0
        if qp.senses[i] == "<=":
            hi[n + k] = np.inf
        else:
            lo[n + k] = -np.inf
    N = n + ns
    Q = np.zeros((N, N))
    Q[:n, :n] = qp.Q
    c = np.concatenate([qp.c, np.zeros(ns)])
    b = qp.b.copy()

    # row scaling
    rs = np.ones(rows)
    if rows:
        mx = np.abs(A).max(axis=1)
        rs = 1.0 / np.where(mx > 0, mx, 1.0)
    A *= rs[:, None]
    b *= rs

    has_l = np.isfinite(lo)
    has_u = np.isfinite(hi)
    qdiag = np.diag(Q).copy()
    diagonal = not np.any(Q - np.diag(qdiag))
    barrier_free = ~has_l & ~has_u & (qdiag <= 0)
    normal_eq = diagonal and not np.any(barrier_free)

    x = np.zeros(N)
    both = has_l & has_u
    x[both] = 0.5 * (lo[both] + hi[both])
    x[has_l & ~has_u] = lo[has_l & ~has_u] + 1.0
    x[~has_l & has_u] = hi[~has_l & has_u] - 1.0
    zscale = max(1.0, np.abs(c).max(initial=0.0))
    zl = np.where(has_l, zscale, 0.0)
    zu = np.where(has_u, zscale, 0.0)
    y = np.zeros(rows)
    n_comp = int(has_l.sum() + has_u.sum())

    bnorm = 1.0 + np.abs(b).max(initial=0.0)
    cnorm = 1.0 + np.abs(c).max(initial=0.0)

    def residuals(x, y, zl, zu):
        rd = Q @ x + c - A.T @ y - zl + zu
        rp = b - A @ x
        return rd, rp

    def factor(H):
        """Return a solver for  H dx - A'dy = r1,  A dx = r2  at the current iterate."""
        if normal_eq:
            # floor the diagonal so vanishing curvature cannot overflow 1/H;
            # refinement below removes the perturbation
            hinv = 1.0 / np.maximum(H, H_FLOOR)
            AH = A * hinv
            if rows:
                Mn = AH @ A.T
                reg = 1e-14 * max(1.0, np.abs(np.diag(Mn)).max())
                try:
                    cf = linalg.cho_factor(Mn + reg * np.eye(rows), check_finite=False)
                    solve_m = lambda r: linalg.cho_solve(cf, r, check_finite=False)  # noqa: E731
                except linalg.LinAlgError:
                    pinv = np.linalg.pinv(Mn)
                    solve_m = lambda r: pinv @ r  # noqa: E731
            else:
                solve_m = lambda r: np.zeros(0)  # noqa: E731

            def once(r1, r2):
                dy = solve_m(r2 - AH @ r1)
                return hinv * (r1 + A.T @ dy), dy

            def solve(r1, r2):
                dx, dy = once(r1, r2)
                # late iterations make A H^-1 A' badly conditioned; refine
                # against the unreduced system
                for _ in range(2):
                    ex, ey = once(r1 - (H * dx - A.T @ dy), r2 - A @ dx)
                    dx, dy = dx + ex, dy + ey
                return dx, dy
            return solve

        K = np.zeros((N + rows, N + rows))
        K[:N, :N] = H
        K[:N, N:] = -A.T
        K[N:, :N] = A
        K[N:, N:] = -1e-13 * np.eye(rows)
        try:
            lu = linalg.lu_factor(K, check_finite=False)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure("singular KKT system") from exc

        def solve(r1, r2):
            sol = linalg.lu_solve(lu, np.concatenate([r1, r2]), check_finite=False)
            return sol[:N], sol[N:]
        return solve

    # bound slacks are iterated on their own so that they never lose
    # precision to cancellation in x - lo when |lo| is large
    sl = np.where(has_l, x - lo, 1.0)
    su = np.where(has_u, hi - x, 1.0)
    it = 0
    converged = False
    best, best_err = None, np.inf
    safe, stall = False, 0
    # out-of-contract (unbounded) programs may overflow on the way to failing
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for it in range(1, MAX_ITER + 1):
            rd, rp = residuals(x, y, zl, zu)
            mu = (np.sum(sl[has_l] * zl[has_l]) + np.sum(su[has_u] * zu[has_u])) / max(n_comp, 1)
            pobj = 0.5 * x @ Q @ x + c @ x
            comp_max = max(np.max(sl[has_l] * zl[has_l], initial=0.0),
                           np.max(su[has_u] * zu[has_u], initial=0.0))
            err = max(np.abs(rp).max(initial=0.0) / bnorm, np.abs(rd).max(initial=0.0) / cnorm,
                      comp_max / (1.0 + abs(pobj)))
            if err < best_err:
                stall = 0 if err < 0.9 * best_err else stall + 1
                best, best_err = (x.copy(), y.copy(), zl.copy(), zu.copy()), err
            else:
                stall += 1
            if stall >= STALL_LIMIT:
                # Mehrotra steps can settle into a cycle on degenerate
                # programs; finish with plain damped centered steps
                safe = True
            if err <= tol:
                converged = True
                break
            sig = np.where(has_l, zl / sl, 0.0) + np.where(has_u, zu / su, 0.0)
            solve = factor(qdiag + sig if normal_eq else Q + np.diag(sig))

            def direction(comp_l, comp_u):
                rhs1 = -rd + np.where(has_l, comp_l / sl, 0.0) - np.where(has_u, comp_u / su, 0.0)
                dx, dy = solve(rhs1, rp)
                dzl = np.where(has_l, (comp_l - zl * dx) / sl, 0.0)
                dzu = np.where(has_u, (comp_u + zu * dx) / su, 0.0)
                return dx, dy, dzl, dzu

            def step_len(dx, dzl, dzu):
                return min(_max_step(sl[has_l], dx[has_l]),
                           _max_step(su[has_u], -dx[has_u]),
                           _max_step(zl[has_l], dzl[has_l]),
                           _max_step(zu[has_u], dzu[has_u]))

            dx, dy, dzl, dzu = direction(-sl * zl, -su * zu)
            a_aff = step_len(dx, dzl, dzu)
            mu_aff = (np.sum((sl + a_aff * dx)[has_l] * (zl + a_aff * dzl)[has_l])
                      + np.sum((su - a_aff * dx)[has_u] * (zu + a_aff * dzu)[has_u])) / max(n_comp, 1)
            if safe:
                sigma = SAFE_SIGMA
                comp_l = sigma * mu - sl * zl
                comp_u = sigma * mu - su * zu
            else:
                sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
                comp_l = sigma * mu - sl * zl - dx * dzl
                comp_u = sigma * mu - su * zu + dx * dzu
            dx, dy, dzl, dzu = direction(comp_l, comp_u)
            alpha = step_len(dx, dzl, dzu)
            # centrality correctors: pull outlying products back toward
            # sigma*mu so one pair cannot keep truncating the step
            target = sigma * mu
            for _ in range(0 if safe else GONDZIO_CORRECTORS):
                if alpha >= 0.9 or target <= 0:
                    break
                a_try = min(1.0, 1.5 * alpha + 0.1)
                vl = (sl + a_try * dx) * (zl + a_try * dzl)
                vu = (su - a_try * dx) * (zu + a_try * dzu)
                tl = np.where(has_l, np.clip(vl, 0.1 * target, 10 * target) - vl, 0.0)
                tu = np.where(has_u, np.clip(vu, 0.1 * target, 10 * target) - vu, 0.0)
                tl = np.maximum(tl, -10 * target)
                tu = np.maximum(tu, -10 * target)
                cand = direction(comp_l + tl, comp_u + tu)
                a_cand = step_len(cand[0], cand[2], cand[3])
                if a_cand < 1.01 * alpha:
                    break
                dx, dy, dzl, dzu = cand
                comp_l, comp_u, alpha = comp_l + tl, comp_u + tu, a_cand
            alpha = min(1.0, 0.995 * alpha)
            x = x + alpha * dx
            sl = np.where(has_l, sl + alpha * dx, 1.0)
            su = np.where(has_u, su - alpha * dx, 1.0)
            y = y + alpha * dy
            zl = np.where(has_l, zl + alpha * dzl, 0.0)
            zu = np.where(has_u, zu + alpha * dzu, 0.0)
            if not (np.all(np.isfinite(x)) and np.all(sl > 0) and np.all(su > 0)):
                break

    if not converged:
        feas = solve_lp(LinearProgram(np.zeros(n), qp.A, qp.senses, qp.b, qp.lb, qp.ub))
        if not feas.optimal:
            return QpSolution(QpStatus.INFEASIBLE, iterations=it)
        if best is None:
            raise NumericalFailure(f"interior point method did not converge in {MAX_ITER} iterations")
        # fall back to the most accurate iterate; the KKT check below decides
        x, y, zl, zu = best

    xs = np.clip(x[:n], qp.lb, qp.ub)
    sol = _package(qp, xs, y * rs, zl[:n], zu[:n], it)
    polished = _polish(qp, xs, y * rs, zl[:n], zu[:n], it)
    if polished is not None and max(polished.kkt_residual.values()) <= max(sol.kkt_residual.values()):
        sol = polished
    if max(sol.kkt_residual.values()) > KKT_TOL:
        raise NumericalFailure(f"KKT residual above tolerance: {sol.kkt_residual}")
    return sol


def _package(qp: QuadraticProgram, x, y, zl, zu, it) -> QpSolution:
    finite_l = np.where(np.isfinite(qp.lb), qp.lb, 0.0)
    finite_u = np.where(np.isfinite(qp.ub), qp.ub, 0.0)
    dual_value = float(qp.b @ y - 0.5 * x @ qp.Q @ x + finite_l @ zl - finite_u @ zu)
    sol = QpSolution(QpStatus.OPTIMAL, x=x, value=qp.objective(x), duals=y,
                     dual_value=dual_value, iterations=it)
    sol.kkt_residual = kkt_residuals(qp, x, y, zl, zu)
    return sol


def _polish(qp: QuadraticProgram, x, y, zl, zu, it) -> QpSolution | None:
    """Re-solve the equality-constrained QP on the active set guessed from
    the interior point iterate.

    Where strict complementarity fails the interior point iterate is only
    accurate to about the square root of its tolerance; the active-set
    solve recovers full precision there. A constraint counts as active when
    its multiplier exceeds its slack.
    """
    n = qp.n
    fix_l = np.isfinite(qp.lb) & (x - qp.lb < zl)
    fix_u = np.isfinite(qp.ub) & ~fix_l & (qp.ub - x < zu)
    free = ~(fix_l | fix_u)
    ax = qp.A @ x
    act = []
    for i, s in enumerate(qp.senses):
        if s == "==" or (s == "<=" and qp.b[i] - ax[i] < -y[i]) or (s == ">=" and ax[i] - qp.b[i] < y[i]):
            act.append(i)
    xp = x.copy()
    xp[fix_l] = qp.lb[fix_l]
    xp[fix_u] = qp.ub[fix_u]
    F = np.flatnonzero(free)
    Aa = qp.A[act]
    nf, na = F.size, len(act)
    K = np.zeros((nf + na, nf + na))
    K[:nf, :nf] = qp.Q[np.ix_(F, F)]
    K[:nf, nf:] = -Aa[:, F].T
    K[nf:, :nf] = Aa[:, F]
    fixed = ~free
    r1 = -qp.c[F] - qp.Q[np.ix_(F, fixed)] @ xp[fixed]
    r2 = qp.b[act] - Aa[:, fixed] @ xp[fixed]
    rhs = np.concatenate([r1, r2])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        # a degenerate active set leaves K singular; least squares still
        # picks a consistent solution when one exists
        try:
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        except np.linalg.LinAlgError:
            return None
    if not np.all(np.isfinite(sol)):
        return None
    xp[F] = sol[:nf]
    yp = np.zeros(qp.A.shape[0])
    yp[act] = sol[nf:]
    grad = qp.Q @ xp + qp.c - qp.A.T @ yp
    zlp = np.where(fix_l, grad, 0.0)
    zup = np.where(fix_u, -grad, 0.0)
    return _package(qp, xp, yp, zlp, zup, it)


def kkt_residuals(qp: QuadraticProgram, x, y, zl, zu) -> dict:
    """Scaled stationarity, primal/dual feasibility and complementarity residuals."""
    scale_c = 1.0 + np.abs(qp.c).max(initial=0.0) + np.abs(qp.Q @ x).max(initial=0.0)
    stat = qp.Q @ x + qp.c - qp.A.T @ y - zl + zu
    ax = qp.A @ x
    # rows are measured relative to their own magnitude |b_i| + sum |a_ij x_j|
    rscale = np.maximum(np.abs(qp.b) + np.abs(qp.A) @ np.abs(x), 1.0) if qp.A.shape[0] else np.ones(0)
    prim = [0.0]
    dual = [0.0, float(np.max(-zl, initial=0.0)), float(np.max(-zu, initial=0.0))]
    comp = [0.0]
    for i, s in enumerate(qp.senses):
        r = (ax[i] - qp.b[i]) / rscale[i]
        if s == "<=":
            prim.append(max(r, 0.0))
            dual.append(max(y[i], 0.0))
        elif s == ">=":
            prim.append(max(-r, 0.0))
            dual.append(max(-y[i], 0.0))
        else:
            prim.append(abs(r))
        if s != "==":
            comp.append(abs(y[i] * (ax[i] - qp.b[i])) / (1.0 + abs(qp.objective(x))))
    prim.append(float(np.max(qp.lb - x, initial=0.0)))
    prim.append(float(np.max(x - qp.ub, initial=0.0)))
    fl = np.isfinite(qp.lb)
    fu = np.isfinite(qp.ub)
    cscale = 1.0 + abs(qp.objective(x))
    comp.append(float(np.max(np.abs(zl[fl] * (x[fl] - qp.lb[fl])), initial=0.0)) / cscale)
    comp.append(float(np.max(np.abs(zu[fu] * (qp.ub[fu] - x[fu])), initial=0.0)) / cscale)
    return {
        "stationarity": float(np.abs(stat).max(initial=0.0) / scale_c),
        "primal": float(max(prim)),
        "dual": float(max(dual)),
        "complementarity": float(max(comp)),
    }
