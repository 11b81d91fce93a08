"""Built-in test problems (smooth part and box only; ``G`` is attached by ``robust``)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .errors import UnknownProblem
from .problems import BoxDomain, CompositeProblem, NonsmoothTerm, SmoothObjective, estimate_lipschitz

SQ2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ProblemEntry:
    name: str
    m: int
    default_n: int
    convex: bool
    source: str
    build: Callable[[int], tuple]
    fixed_n: bool = True


_REGISTRY: dict[str, ProblemEntry] = {}


def _register(name, m, n, convex, source, fixed_n=True):
    def deco(fn):
        _REGISTRY[name] = ProblemEntry(name, m, n, convex, source, fn, fixed_n)
        return fn
    return deco


def _separable_quadratic_rho(box, centers, scale):
    """Exact sup of ``||scale * (x - c)||`` over the box for each center ``c``."""
    out = []
    for c in centers:
        far = np.maximum(np.abs(box.lb - c), np.abs(box.ub - c))
        out.append(scale * np.linalg.norm(far))
    return max(out)


@_register("JOS1", 2, 100, True, "Jin, Olhofer, Sendhoff (2001), GECCO; problem JOS1", fixed_n=False)
def _jos1(n):
    def f(x):
        return np.array([np.dot(x, x) / n, np.dot(x - 2, x - 2) / n])

    def g(x):
        return np.vstack([2 * x / n, 2 * (x - 2) / n])

    box = BoxDomain(np.full(n, -100.0), np.full(n, 100.0))
    rho = _separable_quadratic_rho(box, [np.zeros(n), np.full(n, 2.0)], 2.0 / n)
    return f, g, box, (2.0 / n, 2.0 / n), rho


@_register("BK1", 2, 2, True, "Huband, Hingston, Barone, While (2006), IEEE TEC 10(5); problem BK1")
def _bk1(n):
    def f(x):
        return np.array([x[0] ** 2 + x[1] ** 2, (x[0] - 5) ** 2 + (x[1] - 5) ** 2])

    def g(x):
        return np.array([[2 * x[0], 2 * x[1]], [2 * (x[0] - 5), 2 * (x[1] - 5)]])

    box = BoxDomain([-5.0, -5.0], [10.0, 10.0])
    rho = _separable_quadratic_rho(box, [np.zeros(2), np.full(2, 5.0)], 2.0)
    return f, g, box, (2.0, 2.0), rho


@_register("SP1", 2, 2, True, "Huband, Hingston, Barone, While (2006), IEEE TEC 10(5); problem SP1")
def _sp1(n):
    def f(x):
        d = x[0] - x[1]
        return np.array([(x[0] - 1) ** 2 + d ** 2, (x[1] - 3) ** 2 + d ** 2])

    def g(x):
        d = x[0] - x[1]
        return np.array([[2 * (x[0] - 1) + 2 * d, -2 * d], [2 * d, 2 * (x[1] - 3) - 2 * d]])

    box = BoxDomain([-100.0, -100.0], [100.0, 100.0])
    # Both Hessians have eigenvalues 3 +- sqrt(5).
    lip = 3.0 + np.sqrt(5.0)
    return f, g, box, (lip, lip), None


@_register("IM1", 2, 2, False, "Huband, Hingston, Barone, While (2006), IEEE TEC 10(5); problem IM1")
def _im1(n):
    def f(x):
        return np.array([2 * np.sqrt(x[0]), x[0] * (1 - x[1]) + 5])

    def g(x):
        return np.array([[1 / np.sqrt(x[0]), 0.0], [1 - x[1], -x[0]]])

    return f, g, BoxDomain([1.0, 1.0], [4.0, 2.0]), None, None


@_register("MOP2", 2, 2, False, "Van Veldhuizen (1999), PhD thesis AFIT; problem MOP2 (Fonseca-Fleming)",
           fixed_n=False)
def _mop2(n):
    c = 1 / np.sqrt(n)

    def f(x):
        return np.array([1 - np.exp(-np.sum((x - c) ** 2)), 1 - np.exp(-np.sum((x + c) ** 2))])

    def g(x):
        e1 = np.exp(-np.sum((x - c) ** 2))
        e2 = np.exp(-np.sum((x + c) ** 2))
        return np.vstack([2 * (x - c) * e1, 2 * (x + c) * e2])

    return f, g, BoxDomain(np.full(n, -4.0), np.full(n, 4.0)), None, None


@_register("FDS", 3, 5, True, "Fliege, Grana Drummond, Svaiter (2009), SIAM J. Optim. 20(2); problem FDS",
           fixed_n=False)
def _fds(n):
    i = np.arange(1, n + 1, dtype=float)
    w3 = i * (n - i + 1) / (n * (n + 1))

    def f(x):
        return np.array([np.sum(i * (x - i) ** 4) / n ** 2,
                         np.exp(x.sum() / n) + np.dot(x, x),
                         np.sum(w3 * np.exp(-x))])

    def g(x):
        return np.vstack([4 * i * (x - i) ** 3 / n ** 2,
                          np.exp(x.sum() / n) / n + 2 * x,
                          -w3 * np.exp(-x)])

    box = BoxDomain(np.full(n, -2.0), np.full(n, 2.0))
    lb, ub = box.lb, box.ub
    # Hessian bounds over the box: diagonal for f1 and f3, rank-one plus 2I for f2.
    l1 = np.max(12 * i * np.maximum((lb - i) ** 2, (ub - i) ** 2) / n ** 2)
    l2 = np.exp(ub.sum() / n) / n + 2.0
    l3 = np.max(w3 * np.exp(-lb))
    return f, g, box, (l1, l2, l3), None


@_register("SD", 2, 4, True, "Stadler, Dauer (1992), AIAA Prog. Astronaut. Aeronaut. 150; four-bar truss SD")
def _sd(n):
    a = np.array([2.0, SQ2, SQ2, 1.0])
    c = np.array([2.0, 2 * SQ2, 2 * SQ2, 2.0])

    def f(x):
        return np.array([a @ x, np.sum(c / x)])

    def g(x):
        return np.vstack([a, -c / x ** 2])

    box = BoxDomain([1.0, SQ2, SQ2, 1.0], [3.0, 3.0, 3.0, 3.0])
    # Hessian of f2 is diag(2c/x^3), largest at the lower bounds.
    l2 = float(np.max(2 * c / box.lb ** 3))
    return f, g, box, (1e-12, l2), None


@_register("SLCDT1", 2, 2, False, "Schaeffler, Schultz, Weinzierl (2002), JOTA 114(1); problem SLC-DT1")
def _slcdt1(n):
    lam = 0.85

    def f(x):
        s, d = x[0] + x[1], x[0] - x[1]
        a, b, e = np.sqrt(1 + s ** 2), np.sqrt(1 + d ** 2), np.exp(-d ** 2)
        return np.array([0.5 * (a + b + d) + lam * e, 0.5 * (a + b - d) + lam * e])

    def g(x):
        s, d = x[0] + x[1], x[0] - x[1]
        a, b, e = np.sqrt(1 + s ** 2), np.sqrt(1 + d ** 2), np.exp(-d ** 2)
        da = np.array([s / a, s / a])
        db = np.array([d / b, -d / b])
        de = -2 * d * e * np.array([1.0, -1.0])
        dd = np.array([1.0, -1.0])
        return np.vstack([0.5 * (da + db + dd) + lam * de, 0.5 * (da + db - dd) + lam * de])

    return f, g, BoxDomain([-1.5, -1.5], [1.5, 1.5]), None, None


@_register("VU2", 2, 2, True, "Huband, Hingston, Barone, While (2006), IEEE TEC 10(5); problem VU2")
def _vu2(n):
    def f(x):
        return np.array([x[0] + x[1] + 1, x[0] ** 2 + 2 * x[1] - 1])

    def g(x):
        return np.array([[1.0, 1.0], [2 * x[0], 2.0]])

    return f, g, BoxDomain([-3.0, -3.0], [3.0, 3.0]), (1e-12, 2.0), None


@_register("Lov1", 2, 2, True, "Lovison (2011), SIAM J. Optim. 21(2); problem Lov1")
def _lov1(n):
    def f(x):
        return np.array([1.05 * x[0] ** 2 + 0.98 * x[1] ** 2,
                         0.99 * (x[0] - 3) ** 2 + 1.03 * (x[1] - 2.5) ** 2])

    def g(x):
        return np.array([[2.1 * x[0], 1.96 * x[1]],
                         [1.98 * (x[0] - 3), 2.06 * (x[1] - 2.5)]])

    return f, g, BoxDomain([-10.0, -10.0], [10.0, 10.0]), (2.1, 2.06), None


@_register("AP1", 3, 2, True, "Ansary, Panda (2015), Optim. Methods Softw. 30(5); problem AP1")
def _ap1(n):
    def f(x):
        return np.array([0.25 * ((x[0] - 1) ** 4 + 2 * (x[1] - 2) ** 4),
                         np.exp((x[0] + x[1]) / 2) + x[0] ** 2 + x[1] ** 2,
                         (np.exp(-x[0]) + 2 * np.exp(-x[1])) / 6])

    def g(x):
        e = np.exp((x[0] + x[1]) / 2)
        return np.array([[(x[0] - 1) ** 3, 2 * (x[1] - 2) ** 3],
                         [0.5 * e + 2 * x[0], 0.5 * e + 2 * x[1]],
                         [-np.exp(-x[0]) / 6, -np.exp(-x[1]) / 3]])

    box = BoxDomain([-10.0, -10.0], [10.0, 10.0])
    # Hessians: f1 diag(3(x1-1)^2, 6(x2-2)^2); f2 e/4 * ones + 2I; f3 diag.
    l1 = max(3 * 11.0 ** 2, 6 * 12.0 ** 2)
    l2 = np.exp(10.0) / 2 + 2.0
    l3 = 2 * np.exp(10.0) / 6
    return f, g, box, (l1, l2, l3), None


@_register("ZDT1", 2, 30, True, "Zitzler, Deb, Thiele (2000), Evol. Comput. 8(2); problem ZDT1",
           fixed_n=False)
def _zdt1(n):
    k = 9.0 / (n - 1)

    def f(x):
        gval = 1 + k * x[1:].sum()
        return np.array([x[0], gval - np.sqrt(x[0] * gval)])

    def g(x):
        gval = 1 + k * x[1:].sum()
        row = np.empty(n)
        row[0] = -0.5 * np.sqrt(gval / x[0])
        row[1:] = k * (1 - 0.5 * np.sqrt(x[0] / gval))
        e1 = np.zeros(n)
        e1[0] = 1.0
        return np.vstack([e1, row])

    # x1 starts at 0.01: the gradient of f2 is unbounded as x1 -> 0.
    lb = np.zeros(n)
    lb[0] = 0.01
    return f, g, BoxDomain(lb, np.ones(n)), None, None


def problem_names() -> list[str]:
    return list(_REGISTRY)


def canonical_name(name: str) -> str:
    """Registry spelling of ``name`` (lookup is case-insensitive)."""
    key = {k.lower(): k for k in _REGISTRY}.get(str(name).lower())
    if key is None:
        raise UnknownProblem(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}")
    return key


def registry_lookup(name: str) -> Callable[..., CompositeProblem]:
    """Factory for the named problem; call it with an optional ``n``."""
    entry = _REGISTRY[canonical_name(name)]

    def factory(n: int | None = None) -> CompositeProblem:
        dim = entry.default_n if n is None else int(n)
        if entry.fixed_n and dim != entry.default_n:
            raise ValueError(f"{entry.name} is defined for n={entry.default_n} only")
        if dim < 1 or (entry.name == "ZDT1" and dim < 2):
            raise ValueError("dimension too small")
        f, g, box, lip, rho = entry.build(dim)
        estimated = lip is None
        smooth = SmoothObjective(dim, entry.m, f, g, None, entry.convex, rho)
        if estimated:
            rng = np.random.default_rng(np.random.SeedSequence([dim, *entry.name.encode()]))
            lip = estimate_lipschitz(smooth, box, rng)
        smooth = SmoothObjective(dim, entry.m, f, g, tuple(lip), entry.convex, rho)
        meta = {"source": entry.source, "lipschitz_estimated": estimated}
        return CompositeProblem(entry.name, smooth, NonsmoothTerm.zero(entry.m), box, meta)

    return factory


def get_problem(name: str, n: int | None = None) -> CompositeProblem:
    return registry_lookup(name)(n)


def problem_manifest() -> list[dict]:
    rows = []
    for entry in _REGISTRY.values():
        _, _, box, _, _ = entry.build(entry.default_n)
        rows.append({"name": entry.name, "n": entry.default_n, "m": entry.m,
                     "convex": entry.convex, "lb": box.lb.tolist(), "ub": box.ub.tolist(),
                     "source": entry.source})
    return rows


def load_manifest() -> list[dict]:
    """The manifest shipped with the package (kept in sync with the registry by the tests)."""
    text = resources.files("mocondg").joinpath("data/problems.json").read_text()
    return json.loads(text)
