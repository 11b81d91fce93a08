"""Independent reference computations used by the tests.

Nothing here calls the package's LP or QP code; each oracle reaches its
answer by a different route (enumeration, projection, brute force).
"""

from __future__ import annotations

import itertools

import numpy as np

from mocondg.problems import BoxDomain, CompositeProblem, NonsmoothTerm, SmoothObjective


def square_problem() -> CompositeProblem:
    """``H(x) = x^2`` on ``[-1, 1]`` with ``G = 0``."""
    smooth = SmoothObjective(1, 1, lambda x: np.array([x[0] ** 2]), lambda x: np.array([[2 * x[0]]]),
                             (2.0,), True, 2.0)
    return CompositeProblem("square", smooth, NonsmoothTerm.zero(1), BoxDomain([-1.0], [1.0]))


# ------------------------------------------------------------------- LP

def lp_vertex_enumeration(c, A_ub, b_ub, lb, ub, tol=1e-9):
    """Minimum of ``c'x`` over ``A_ub x <= b_ub, lb <= x <= ub`` (finite bounds)
    by visiting every basic solution."""
    n = len(c)
    rows = [np.asarray(a, float) for a in A_ub]
    rhs = list(b_ub)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(e)
        rhs.append(ub[i])
        rows.append(-e)
        rhs.append(-lb[i])
    G = np.array(rows)
    h = np.array(rhs)
    idx = np.array(list(itertools.combinations(range(len(G)), n)))
    M = G[idx]
    ok = np.abs(np.linalg.det(M)) > 1e-12
    M, idx = M[ok], idx[ok]
    X = np.linalg.solve(M, h[idx][..., None])[..., 0]
    feasible = np.all(X @ G.T <= h + tol * (1 + np.abs(h)), axis=1)
    if not np.any(feasible):
        return np.inf, None
    X = X[feasible]
    vals = X @ np.asarray(c, float)
    k = int(np.argmin(vals))
    return float(vals[k]), X[k]


# ------------------------------------------------------------------- QP

def box_qp_projected_gradient(Q, c, lb, ub, tol=1e-10, max_iter=200_000):
    """``min 0.5 x'Qx + c'x`` over a box by projected gradient with step ``1/L``."""
    L = float(np.linalg.eigvalsh(Q).max())
    x = np.clip(np.zeros(len(c)), lb, ub)
    for _ in range(max_iter):
        x_new = np.clip(x - (Q @ x + c) / L, lb, ub)
        if np.abs(x_new - x).max() <= tol:
            return x_new
        x = x_new
    return x


def inequality_qp_dual_projected_gradient(Q, c, A, b, tol=1e-12, max_iter=500_000):
    """``min 0.5 x'Qx + c'x`` s.t. ``Ax <= b`` for positive definite ``Q``,
    through projected gradient ascent on the dual over ``y >= 0``."""
    Qi = np.linalg.inv(Q)
    L = float(np.linalg.eigvalsh(A @ Qi @ A.T).max())
    y = np.zeros(len(b))
    for _ in range(max_iter):
        x = -Qi @ (c + A.T @ y)
        y_new = np.maximum(0.0, y + (A @ x - b) / L)
        if np.abs(y_new - y).max() <= tol:
            y = y_new
            break
        y = y_new
    return -Qi @ (c + A.T @ y)


# -------------------------------------------------------- support sets

def polytope_vertices(B, delta):
    """Vertices ``B^{-1} s`` for ``s`` in ``{-delta, delta}^n``."""
    n = len(B)
    out = []
    for signs in itertools.product((-delta, delta), repeat=n):
        out.append(np.linalg.solve(B, np.array(signs)))
    return np.array(out)


def support_by_vertices(B, delta, x):
    return float(np.max(polytope_vertices(B, delta) @ np.asarray(x, float)))


def max_form_grid(problem: CompositeProblem, x, points_per_axis: int):
    """Minimum of the max-form over a uniform grid of the box and the
    Lipschitz bound on its discretization error."""
    n = problem.n
    axes = [np.linspace(problem.box.lb[i], problem.box.ub[i], points_per_axis) for i in range(n)]
    U = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T
    J = np.asarray(problem.smooth.grad(x), float)
    gx = problem.nonsmooth.value(x)
    if problem.nonsmooth.is_zero:
        G = np.zeros((len(U), problem.m))
        lip_g = np.zeros(problem.m)
    else:
        V = [polytope_vertices(s.B, s.delta) for s in problem.nonsmooth.sets]
        G = np.column_stack([np.max(U @ v.T, axis=1) for v in V])
        lip_g = np.array([np.linalg.norm(v, axis=1).max() for v in V])
    vals = np.max(G - gx + (U - x) @ J.T, axis=1)
    h = (problem.box.ub - problem.box.lb) / (points_per_axis - 1)
    lip = float(np.max(np.linalg.norm(J, axis=1) + lip_g))
    # every box point is within half a grid diagonal of some grid point
    bound = lip * 0.5 * float(np.linalg.norm(h))
    k = int(np.argmin(vals))
    return float(vals[k]), U[k], bound


# ------------------------------------------------------------ metrics

def brute_nondominated(P):
    P = np.asarray(P, float)
    keep = []
    for i, p in enumerate(P):
        dominated = False
        for j, q in enumerate(P):
            if j != i and all(q[k] <= p[k] for k in range(len(p))) and any(
                    q[k] < p[k] for k in range(len(p))):
                dominated = True
                break
        keep.append(not dominated)
    return np.array(keep, dtype=bool)


def brute_spread(P, lo, hi):
    """Gamma and Delta recomputed with plain loops."""
    P = [list(p) for p in P]
    m = len(P[0])
    N = len(P)
    gamma = 0.0
    delta = 0.0
    for j in range(m):
        col = sorted(p[j] for p in P)
        seq = [lo[j]] + col + [hi[j]]
        gaps = [seq[i + 1] - seq[i] for i in range(len(seq) - 1)]
        gamma = max(gamma, max(gaps))
        inner = gaps[1:N]
        mean = sum(inner) / len(inner)
        num = gaps[0] + gaps[N] + sum(abs(g - mean) for g in inner)
        den = gaps[0] + gaps[N] + (N - 1) * mean
        delta = max(delta, num / den if den > 0 else 0.0)
    return gamma, delta
