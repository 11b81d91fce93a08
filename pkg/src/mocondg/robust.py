"""Polyhedral uncertainty sets and the robust nonsmooth term built from them."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateMatrix, DimensionMismatch
from .problems import BoxDomain, CompositeProblem, NonsmoothTerm

COND_FLOOR = 1e-8
MAX_RETRIES = 100
DELTA_BAR_RANGE = (0.02, 0.10)
PRNG_VERSION = f"numpy-PCG64/SeedSequence numpy=={np.__version__}"

# Child streams of the config seed: 0 draws delta_bar, 1 draws the anchor,
# 2 + j draws B_j.
_STREAM_DELTA, _STREAM_ANCHOR, _STREAM_FIRST_B = 0, 1, 2


def _well_conditioned(B: np.ndarray) -> bool:
    s = np.linalg.svd(B, compute_uv=False)
    return bool(s[-1] >= COND_FLOOR * s[0] and s[0] > 0)


class PolyhedralUncertaintySet:
    """``Z = {z : -delta e <= B z <= delta e}``.

    The support function has the closed form ``delta * ||B^{-T} x||_1``,
    which is what ``value`` uses; ``support_value`` in the subproblem module
    computes the same number through the dual LP.
    """

    def __init__(self, B, delta: float):
        B = np.array(B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise DimensionMismatch("B must be square")
        if not np.all(np.isfinite(B)):
            raise ValueError("B must be finite")
        delta = float(delta)
        if not (delta > 0 and np.isfinite(delta)):
            raise ValueError("delta must be positive and finite")
        if not _well_conditioned(B):
            raise DegenerateMatrix("B is numerically singular")
        B.flags.writeable = False
        self.B = B
        self.delta = delta
        C = np.linalg.inv(B).T
        C.flags.writeable = False
        self._C = C

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def A(self) -> np.ndarray:
        return np.vstack([self.B, -self.B])

    @property
    def b(self) -> np.ndarray:
        return np.full(2 * self.n, self.delta)

    def value(self, x) -> float:
        return float(self.delta * np.abs(self._C @ np.asarray(x, dtype=float)).sum())

    def directional(self, x, d) -> float:
        """One-sided derivative of the support function at ``x`` along ``d``."""
        v = self._C @ np.asarray(x, dtype=float)
        w = self._C @ np.asarray(d, dtype=float)
        kink = np.abs(v) <= 1e-14 * max(1.0, np.abs(v).max(initial=0.0))
        return float(self.delta * np.where(kink, np.abs(w), np.sign(v) * w).sum())

    def vertices(self) -> np.ndarray:
        """All ``2^n`` vertices ``B^{-1} s`` with ``s in {-delta, delta}^n`` (small n only)."""
        if self.n > 16:
            raise ValueError("vertex enumeration is limited to n <= 16")
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.n, indexing="ij")).reshape(self.n, -1).T
        return np.linalg.solve(self.B, (self.delta * signs).T).T

    def lipschitz(self) -> float:
        """``sup ||z||`` over the set.

        Exact by vertex enumeration up to n = 12; above that the bound
        ``delta * sqrt(n) * ||B^{-1}||_2`` is returned, which can only
        overestimate.
        """
        if self.n <= 12:
            return float(np.linalg.norm(self.vertices(), axis=1).max())
        return float(self.delta * np.sqrt(self.n) * np.linalg.norm(self._C, 2))

    def contains(self, z, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.B @ np.asarray(z, dtype=float)) <= self.delta * (1 + tol)))

    def with_delta(self, delta: float) -> "PolyhedralUncertaintySet":
        return PolyhedralUncertaintySet(self.B, delta)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": self.delta, "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PolyhedralUncertaintySet":
        return cls(np.array(data["B"], dtype=float), data["delta"])

    def __repr__(self):
        return f"PolyhedralUncertaintySet(n={self.n}, delta={self.delta:.6g})"


AnchorPolicy = Union[str, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class RobustConfig:
    """Seeded recipe for the robust term.

    ``anchor`` is ``"random"`` (a seeded uniform point of the box, the default),
    ``"midpoint"`` or an explicit point.  ``delta_bar`` is a number in
    [0.02, 0.10] or ``"random"``; with ``per_instance=False`` a random value is
    drawn once per (seed, problem) and shared by every start.
    """

    seed: int = 0
    delta_bar: float | str = "random"
    anchor: AnchorPolicy = "random"
    per_instance: bool = False

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if isinstance(self.delta_bar, str):
            if self.delta_bar != "random":
                raise ValueError("delta_bar must be numeric or 'random'")
        else:
            lo, hi = DELTA_BAR_RANGE
            if not (lo <= float(self.delta_bar) <= hi):
                raise ValueError(f"delta_bar must lie in [{lo}, {hi}]")
        if isinstance(self.anchor, str) and self.anchor not in ("random", "midpoint"):
            raise ValueError("anchor must be 'random', 'midpoint' or a point")

    def with_instance(self, instance: int) -> "RobustConfig":
        """Config for one start when delta_bar is redrawn per instance."""
        if not self.per_instance:
            return self
        return replace(self, seed=(int(self.seed) * 1_000_003 + int(instance) + 1) % 2 ** 64,
                       per_instance=False)

    def to_dict(self) -> dict:
        anchor = self.anchor if isinstance(self.anchor, str) else np.asarray(self.anchor, float).tolist()
        return {"seed": int(self.seed), "delta_bar": self.delta_bar, "anchor": anchor,
                "per_instance": self.per_instance}

    @classmethod
    def from_dict(cls, data: dict) -> "RobustConfig":
        return cls(seed=int(data.get("seed", 0)), delta_bar=data.get("delta_bar", "random"),
                   anchor=data.get("anchor", "random"),
                   per_instance=bool(data.get("per_instance", False)))


def _streams(seed: int, m: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(_STREAM_FIRST_B + m)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def resolve_delta_bar(config: RobustConfig, m: int = 1) -> float:
    if not isinstance(config.delta_bar, str):
        return float(config.delta_bar)
    lo, hi = DELTA_BAR_RANGE
    return float(_streams(config.seed, m)[_STREAM_DELTA].uniform(lo, hi))


def resolve_anchor(config: RobustConfig, box: BoxDomain) -> np.ndarray:
    if isinstance(config.anchor, str):
        if config.anchor == "midpoint":
            return box.midpoint
        rng = _streams(config.seed, 0)[_STREAM_ANCHOR]
        return box.sample(rng, 1)[0]
    point = np.asarray(config.anchor, dtype=float).ravel()
    if point.size != box.n:
        raise DimensionMismatch("anchor length differs from n")
    return point


def build_uncertainty(config: RobustConfig, n: int, m: int, box: BoxDomain) -> list[PolyhedralUncertaintySet]:
    if box.n != n:
        raise DimensionMismatch("box dimension differs from n")
    delta = resolve_delta_bar(config, m) * float(np.linalg.norm(resolve_anchor(config, box)))
    if not delta > 0:
        raise ValueError("anchor point has zero norm, so delta would vanish; pick another anchor")
    streams = _streams(config.seed, m)
    sets = []
    for j in range(m):
        rng = streams[_STREAM_FIRST_B + j]
        for _ in range(MAX_RETRIES):
            B = rng.random((n, n))
            if _well_conditioned(B):
                sets.append(PolyhedralUncertaintySet(B, delta))
                break
        else:
            raise DegenerateMatrix(f"no nonsingular B after {MAX_RETRIES} draws")
    return sets


def robustify(base: CompositeProblem, sets: Sequence[PolyhedralUncertaintySet]) -> CompositeProblem:
    if not base.nonsmooth.is_zero:
        raise ValueError("base problem already carries a nonsmooth term")
    sets = list(sets)
    if len(sets) != base.m:
        raise DimensionMismatch(f"need {base.m} sets, got {len(sets)}")
    for s in sets:
        if s.n != base.n:
            raise DimensionMismatch("set dimension differs from n")
    meta = dict(base.meta)
    meta["robust"] = True
    return CompositeProblem(base.name, base.smooth, NonsmoothTerm.support(sets), base.box, meta)


def make_robust(base: CompositeProblem, config: RobustConfig) -> CompositeProblem:
    sets = build_uncertainty(config, base.n, base.m, base.box)
    problem = robustify(base, sets)
    problem.meta.update({"robust_config": config.to_dict(),
                         "delta_bar": resolve_delta_bar(config, base.m),
                         "prng": PRNG_VERSION})
    return problem


def export_sets(sets: Sequence[PolyhedralUncertaintySet], path=None) -> str:
    text = json.dumps({"prng": PRNG_VERSION, "sets": [s.to_dict() for s in sets]}, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_sets(text: str) -> list[PolyhedralUncertaintySet]:
    return [PolyhedralUncertaintySet.from_dict(d) for d in json.loads(text)["sets"]]
