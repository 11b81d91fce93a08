"""Composite multiobjective problems ``F(x) = G(x) + H(x)`` over a box."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, OutOfDomain

BOX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        lb = np.atleast_1d(np.asarray(self.lb, dtype=float)).copy()
        ub = np.atleast_1d(np.asarray(self.ub, dtype=float)).copy()
        if lb.shape != ub.shape or lb.ndim != 1:
            raise DimensionMismatch("lb and ub must be vectors of equal length")
        if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
            raise ValueError("box bounds must be finite")
        if np.any(lb > ub):
            raise ValueError("lb must not exceed ub")
        lb.flags.writeable = False
        ub.flags.writeable = False
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        if not self.diameter() > 0:
            raise ValueError("box must have positive diameter")

    @property
    def n(self) -> int:
        return self.lb.size

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lb + self.ub)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.ub - self.lb))

    def contains(self, x, tol: float = BOX_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        scale = np.maximum(1.0, np.maximum(np.abs(self.lb), np.abs(self.ub)))
        return bool(np.all(x >= self.lb - tol * scale) and np.all(x <= self.ub + tol * scale))

    def check(self, x, tol: float = BOX_TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise DimensionMismatch(f"point has {x.size} entries, box has {self.n}")
        if not self.contains(x, tol):
            raise OutOfDomain("point lies outside the box")
        return x

    def clip(self, x) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lb), self.ub)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lb + (self.ub - self.lb) * rng.random((count, self.n))

    def vertices(self, limit: int = 4096, rng: np.random.Generator | None = None) -> np.ndarray:
        """All corners when there are at most ``limit`` of them, else a random subset."""
        if 2 ** self.n <= limit:
            bits = np.array(list(itertools.product((0, 1), repeat=self.n)), dtype=bool)
        else:
            rng = rng or np.random.default_rng(0)
            bits = rng.random((limit, self.n)) < 0.5
        return np.where(bits, self.ub, self.lb)

    def to_dict(self) -> dict:
        return {"lb": self.lb.tolist(), "ub": self.ub.tolist()}


@dataclass(frozen=True, eq=False)
class SmoothObjective:
    """The smooth part ``H``; ``eval`` returns the m values, ``grad`` the m-by-n Jacobian."""

    n: int
    m: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: tuple[float, ...] | None = None
    convex: bool = False
    grad_norm_bound: float | None = None

    def __post_init__(self):
        if self.lipschitz is not None:
            lip = tuple(float(v) for v in self.lipschitz)
            if len(lip) != self.m:
                raise DimensionMismatch("one Lipschitz constant per objective")
            if not max(lip) > 0:
                raise ValueError("largest gradient Lipschitz constant must be positive")
            object.__setattr__(self, "lipschitz", lip)

    @property
    def L(self) -> float | None:
        return None if self.lipschitz is None else max(self.lipschitz)


class NonsmoothTerm:
    """``G``: either identically zero or one support function per objective."""

    def __init__(self, m: int, sets: Sequence | None = None):
        self.m = int(m)
        self.sets = None if sets is None else tuple(sets)
        if self.sets is not None and len(self.sets) != self.m:
            raise DimensionMismatch(f"need {self.m} uncertainty sets, got {len(self.sets)}")

    @classmethod
    def zero(cls, m: int) -> "NonsmoothTerm":
        return cls(m)

    @classmethod
    def support(cls, sets: Sequence) -> "NonsmoothTerm":
        return cls(len(sets), sets)

    @property
    def is_zero(self) -> bool:
        return self.sets is None

    @property
    def variant(self) -> str:
        return "Zero" if self.is_zero else "SupportFunction"

    def value(self, x) -> np.ndarray:
        if self.is_zero:
            return np.zeros(self.m)
        return np.array([s.value(x) for s in self.sets])

    def directional(self, x, d) -> np.ndarray:
        """One-sided directional derivatives ``g_j'(x; d)``."""
        if self.is_zero:
            return np.zeros(self.m)
        return np.array([s.directional(x, d) for s in self.sets])

    def lipschitz(self) -> np.ndarray:
        if self.is_zero:
            return np.zeros(self.m)
        return np.array([s.lipschitz() for s in self.sets])

    def __repr__(self):
        return f"NonsmoothTerm({self.variant}, m={self.m})"


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    name: str
    smooth: SmoothObjective
    nonsmooth: NonsmoothTerm
    box: BoxDomain
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.smooth.n != self.box.n:
            raise DimensionMismatch("smooth part and box disagree on n")
        if self.nonsmooth.m != self.smooth.m:
            raise DimensionMismatch("smooth and nonsmooth parts disagree on m")
        if self.nonsmooth.sets is not None:
            for s in self.nonsmooth.sets:
                if s.n != self.n:
                    raise DimensionMismatch("uncertainty set dimension differs from n")

    @property
    def n(self) -> int:
        return self.smooth.n

    @property
    def m(self) -> int:
        return self.smooth.m


@dataclass
class EvalCounter:
    """Per-run tallies; never stored on the problem itself."""

    f_evals: int = 0
    grad_evals: int = 0
    lp_solves: int = 0
    qp_solves: int = 0

    def as_dict(self) -> dict:
        return {"f_evals": self.f_evals, "grad_evals": self.grad_evals,
                "lp_solves": self.lp_solves, "qp_solves": self.qp_solves}


class Evaluation(NamedTuple):
    F: np.ndarray
    H: np.ndarray
    G: np.ndarray


def evaluate(problem: CompositeProblem, x, counter: EvalCounter | None = None) -> Evaluation:
    x = problem.box.check(x)
    H = np.asarray(problem.smooth.eval(x), dtype=float)
    G = problem.nonsmooth.value(x)
    if counter is not None:
        counter.f_evals += 1
    return Evaluation(G + H, H, G)


def jacobian(problem: CompositeProblem, x, counter: EvalCounter | None = None) -> np.ndarray:
    x = problem.box.check(x)
    J = np.asarray(problem.smooth.grad(x), dtype=float).reshape(problem.m, problem.n)
    if counter is not None:
        counter.grad_evals += 1
    return J


def finite_difference_jacobian(problem: CompositeProblem, x, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``H``; the smooth part must be defined slightly outside the box."""
    x = np.asarray(x, dtype=float)
    J = np.empty((problem.m, problem.n))
    f = problem.smooth.eval
    for i in range(problem.n):
        step = h * max(1.0, abs(x[i]))
        e = np.zeros(problem.n)
        e[i] = step
        J[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * step)
    return J


def estimate_lipschitz(smooth: SmoothObjective, box: BoxDomain, rng: np.random.Generator,
                       pairs: int = 1000, safety: float = 1.5) -> tuple[float, ...]:
    """Sampled gradient Lipschitz constants, one per objective, times ``safety``.

    Half of the pairs are spread over the whole box and half are local, so
    both the average and the peak curvature get probed.
    """
    xs = box.sample(rng, pairs)
    ys = box.sample(rng, pairs)
    width = box.ub - box.lb
    local = pairs // 2
    ys[:local] = box.clip(xs[:local] + 1e-3 * width * rng.standard_normal((local, box.n)))
    best = np.zeros(smooth.m)
    for x, y in zip(xs, ys):
        dist = np.linalg.norm(x - y)
        if dist < 1e-12:
            continue
        diff = np.linalg.norm(np.asarray(smooth.grad(x)) - np.asarray(smooth.grad(y)), axis=1)
        best = np.maximum(best, diff / dist)
    best = np.maximum(best * safety, 0.0)
    if best.max() <= 0:
        best[:] = 1e-12
    return tuple(best.tolist())
