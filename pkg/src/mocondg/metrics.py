"""Pareto frontier assembly and the Purity, Spread and performance-profile metrics.

Dominance: ``a`` dominates ``b`` when ``b - a`` is componentwise nonnegative
and nonzero. Identical points never dominate each other, so duplicates
survive the filter together.

Spread metrics follow Custódio, Madeira, Vaz and Vicente (2011). For a
frontier of ``N`` points sorted by objective ``j``, with extreme points
``f_0`` and ``f_{N+1}`` appended, let ``d_i = f_{i+1,j} - f_{i,j}`` for
``i = 0, ..., N``. Then

    Gamma = max_j max_{0 <= i <= N} d_i
    Delta = max_j (d_0 + d_N + sum_{i=1}^{N-1} |d_i - dbar|)
                  / (d_0 + d_N + (N - 1) dbar)

where ``dbar`` is the mean of ``d_1, ..., d_{N-1}``.

Performance profiles follow Dolan and Moré (2002): ``r_{p,s} = c_{p,s} /
min_s c_{p,s}``, failures get ``r = inf`` and ``rho_s(tau)`` is the fraction
of instances with ``r_{p,s} <= tau``. A tie at the best cost gives every
tied solver ``r = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import UndefinedMetric


def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of the rows of ``points`` that no other row dominates."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValueError("points must be a 2-D array")
    keep = np.ones(len(P), dtype=bool)
    for i in range(len(P)):
        le = np.all(P <= P[i], axis=1)
        lt = np.any(P < P[i], axis=1)
        keep[i] = not np.any(le & lt)
    return keep


@dataclass
class FrontierApproximation:
    """Mutually nondominated objective vectors with their origin."""

    points: np.ndarray
    solvers: list[str] = field(default_factory=list)
    instances: list = field(default_factory=list)

    @classmethod
    def build(cls, points, solvers: Sequence[str] | None = None,
              instances: Sequence | None = None) -> "FrontierApproximation":
        P = np.asarray(points, dtype=float)
        if P.size == 0:
            return cls(np.zeros((0, P.shape[1] if P.ndim == 2 else 0)), [], [])
        solvers = list(solvers) if solvers is not None else [""] * len(P)
        instances = list(instances) if instances is not None else list(range(len(P)))
        if len(solvers) != len(P) or len(instances) != len(P):
            raise ValueError("solvers and instances must match the number of points")
        keep = nondominated_mask(P)
        idx = np.flatnonzero(keep)
        return cls(P[idx], [solvers[i] for i in idx], [instances[i] for i in idx])

    def __len__(self) -> int:
        return len(self.points)

    def of(self, solver: str) -> np.ndarray:
        mask = np.array([s == solver for s in self.solvers], dtype=bool)
        return self.points[mask] if len(mask) else self.points


def purity(frontiers: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Share of each solver's own frontier that survives in the combined one.

    Each value in ``frontiers`` holds that solver's objective vectors; they
    are filtered to the solver's own nondominated set first.
    """
    if len(frontiers) < 2:
        raise ValueError("purity needs at least two solvers")
    own = {}
    for name, pts in frontiers.items():
        P = np.asarray(pts, dtype=float)
        if P.size == 0:
            raise UndefinedMetric(f"solver {name!r} contributed no frontier points")
        own[name] = P[nondominated_mask(P)]
    union = np.vstack(list(own.values()))
    owner = np.concatenate([np.full(len(P), k) for k, P in enumerate(own.values())])
    keep = nondominated_mask(union)
    return {name: float(np.sum(keep[owner == k]) / len(own[name]))
            for k, name in enumerate(own)}


def spread_metrics(frontier, extremes=None) -> tuple[float, float]:
    """``(Gamma, Delta)`` of a frontier.

    ``extremes`` is a ``(2, m)`` array of lower and upper extreme values per
    objective, normally taken from the reference frontier of all solvers;
    by default the frontier's own per-objective minima and maxima are used.
    """
    P = np.asarray(frontier, dtype=float)
    if P.ndim != 2 or len(P) < 2:
        raise UndefinedMetric("spread needs at least two frontier points")
    m = P.shape[1]
    if m not in (2, 3):
        raise ValueError("spread metrics are defined here for 2 or 3 objectives")
    if extremes is None:
        lo, hi = P.min(axis=0), P.max(axis=0)
    else:
        E = np.asarray(extremes, dtype=float).reshape(2, m)
        lo, hi = np.minimum(E[0], P.min(axis=0)), np.maximum(E[1], P.max(axis=0))
    gamma = 0.0
    delta = 0.0
    N = len(P)
    for j in range(m):
        col = np.concatenate([[lo[j]], np.sort(P[:, j]), [hi[j]]])
        d = np.diff(col)
        gamma = max(gamma, float(d.max()))
        inner = d[1:N]
        dbar = float(inner.mean())
        num = d[0] + d[N] + np.abs(inner - dbar).sum()
        den = d[0] + d[N] + (N - 1) * dbar
        delta = max(delta, float(num / den) if den > 0 else 0.0)
    return gamma, delta


@dataclass(frozen=True)
class ProfileCurve:
    """Right-continuous step function ``rho(tau)`` of one solver."""

    solver: str
    ratios: np.ndarray
    n_instances: int

    def __call__(self, tau) -> np.ndarray | float:
        t = np.asarray(tau, dtype=float)
        out = np.searchsorted(self.ratios, t, side="right") / max(self.n_instances, 1)
        return float(out) if out.ndim == 0 else out

    @property
    def efficiency(self) -> float:
        return float(self(1.0))

    @property
    def robustness(self) -> float:
        return float(np.isfinite(self.ratios).sum() / max(self.n_instances, 1))

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints ``tau`` (finite ratios, deduplicated) and ``rho`` just after each."""
        finite = np.unique(self.ratios[np.isfinite(self.ratios)])
        return finite, np.asarray(self(finite), dtype=float)


def performance_ratios(costs) -> np.ndarray:
    """Ratio matrix; ``nan`` or ``inf`` costs mark failures."""
    C = np.asarray(costs, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost matrix must be instances x solvers")
    ok = np.isfinite(C)
    if np.any(C[ok] <= 0):
        raise ValueError("costs of successful runs must be positive")
    C = np.where(ok, C, np.inf)
    best = C.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        R = np.where(ok & np.isfinite(best), C / best, np.inf)
    return R


def performance_profile(costs, solvers: Sequence[str] | None = None) -> dict[str, ProfileCurve]:
    R = performance_ratios(costs)
    names = list(solvers) if solvers is not None else [f"s{k}" for k in range(R.shape[1])]
    if len(names) != R.shape[1]:
        raise ValueError("one solver name per column is required")
    return {name: ProfileCurve(name, np.sort(R[:, k]), R.shape[0]) for k, name in enumerate(names)}
