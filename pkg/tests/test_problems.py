import numpy as np
import pytest
from hypothesis import given, strategies as st

from mocondg.errors import DimensionMismatch, OutOfDomain, UnknownProblem
from mocondg.problems import (BoxDomain, CompositeProblem, EvalCounter, NonsmoothTerm, SmoothObjective,
                              evaluate, finite_difference_jacobian, jacobian)
from mocondg.registry import get_problem, load_manifest, problem_manifest, problem_names, registry_lookup
from mocondg.robust import PolyhedralUncertaintySet, robustify


def test_box_rejects_bad_bounds():
    with pytest.raises(ValueError):
        BoxDomain([1.0], [0.0])
    with pytest.raises(ValueError):
        BoxDomain([0.0], [np.inf])


def test_box_diameter_and_midpoint():
    box = BoxDomain([-1.0, -1.0], [1.0, 1.0])
    assert box.diameter() == pytest.approx(2 * np.sqrt(2))
    np.testing.assert_array_equal(box.midpoint, [0.0, 0.0])


def test_box_tolerance():
    box = BoxDomain([0.0], [1.0])
    box.check([1.0 + 5e-13])
    with pytest.raises(OutOfDomain):
        box.check([1.0 + 1e-9])
    with pytest.raises(DimensionMismatch):
        box.check([0.5, 0.5])


def test_jos1_value_at_origin():
    p = get_problem("JOS1", 2)
    ev = evaluate(p, [0.0, 0.0])
    np.testing.assert_allclose(ev.F, [0.0, 4.0])
    np.testing.assert_array_equal(ev.F, ev.H)


def test_jos1_jacobian_hand_values():
    J = jacobian(get_problem("JOS1", 2), [1.0, 1.0])
    np.testing.assert_allclose(J, [[1.0, 1.0], [-1.0, -1.0]])


def test_constant_smooth_part_has_zero_jacobian():
    smooth = SmoothObjective(2, 1, lambda x: np.array([3.0]), lambda x: np.zeros((1, 2)), (1.0,))
    p = CompositeProblem("const", smooth, NonsmoothTerm.zero(1), BoxDomain([0, 0], [1, 1]))
    np.testing.assert_array_equal(jacobian(p, [0.3, 0.7]), np.zeros((1, 2)))


def test_box_support_is_l1_norm():
    smooth = SmoothObjective(2, 2, lambda x: np.zeros(2), lambda x: np.zeros((2, 2)), (1.0, 1.0))
    base = CompositeProblem("zero", smooth, NonsmoothTerm.zero(2), BoxDomain([-5, -5], [5, 5]))
    sets = [PolyhedralUncertaintySet(np.eye(2), 1.0) for _ in range(2)]
    np.testing.assert_allclose(evaluate(robustify(base, sets), [1.0, -2.0]).F, [3.0, 3.0])


def test_out_of_domain():
    p = get_problem("BK1")
    with pytest.raises(OutOfDomain):
        evaluate(p, [11.0, 0.0])
    with pytest.raises(OutOfDomain):
        jacobian(p, [0.0, -6.0])


def test_counters_are_per_run():
    p = get_problem("BK1")
    c = EvalCounter()
    evaluate(p, [0.0, 0.0], c)
    evaluate(p, [1.0, 0.0], c)
    jacobian(p, [0.0, 0.0], c)
    assert (c.f_evals, c.grad_evals) == (2, 1)
    assert not hasattr(p, "f_evals")


def test_registry_boxes():
    p = get_problem("JOS1")
    assert p.n == 100 and p.m == 2
    np.testing.assert_array_equal(p.box.lb, -100.0)
    np.testing.assert_array_equal(p.box.ub, 100.0)
    bk1 = get_problem("BK1")
    np.testing.assert_array_equal(bk1.box.lb, [-5, -5])
    np.testing.assert_array_equal(bk1.box.ub, [10, 10])
    assert bk1.smooth.convex and bk1.m == 2


def test_unknown_problem():
    with pytest.raises(UnknownProblem):
        registry_lookup("NOPE")


def test_lookup_is_case_insensitive():
    assert get_problem("bk1").name == "BK1"


def test_curated_registry_members():
    names = set(problem_names())
    assert {"JOS1", "BK1", "SP1", "IM1", "MOP2", "FDS", "SD", "SLCDT1", "VU2",
            "Lov1", "AP1", "ZDT1"} <= names
    ms = {get_problem(n).m for n in names}
    assert ms == {2, 3}


def test_manifest_in_sync():
    assert load_manifest() == problem_manifest()


@pytest.mark.parametrize("name", problem_names())
def test_jacobian_matches_finite_differences(name):
    p = get_problem(name)
    rng = np.random.default_rng(11)
    # stay a step away from the bounds so central differences remain defined
    pad = 1e-4 * (p.box.ub - p.box.lb)
    inner = BoxDomain(p.box.lb + pad, p.box.ub - pad)
    for x in inner.sample(rng, 100):
        J = jacobian(p, x)
        Jfd = finite_difference_jacobian(p, x)
        assert np.abs(J - Jfd).max() <= 1e-5 * (1 + np.abs(J).max())


@pytest.mark.parametrize("name", [n for n in problem_names() if get_problem(n).smooth.convex])
def test_convexity_flag(name):
    p = get_problem(name)
    rng = np.random.default_rng(5)
    xs, ys = p.box.sample(rng, 100), p.box.sample(rng, 100)
    for x, y in zip(xs, ys):
        mid = p.smooth.eval(0.5 * (x + y))
        avg = 0.5 * (p.smooth.eval(x) + p.smooth.eval(y))
        assert np.all(mid <= avg + 1e-10 * (1 + np.abs(avg)))


@pytest.mark.parametrize("name", problem_names())
def test_lipschitz_constant_is_an_upper_bound_on_samples(name):
    p = get_problem(name)
    rng = np.random.default_rng(3)
    xs, ys = p.box.sample(rng, 200), p.box.sample(rng, 200)
    L = np.array(p.smooth.lipschitz)
    for x, y in zip(xs, ys):
        ratio = np.linalg.norm(p.smooth.grad(x) - p.smooth.grad(y), axis=1) / np.linalg.norm(x - y)
        assert np.all(ratio <= L * (1 + 1e-9))


@pytest.mark.parametrize("name", problem_names())
def test_evaluation_is_deterministic_and_additive(name):
    p = get_problem(name)
    x = p.box.sample(np.random.default_rng(0), 1)[0]
    a, b = evaluate(p, x), evaluate(p, x)
    np.testing.assert_array_equal(a.F, b.F)
    np.testing.assert_array_equal(a.F, a.G + a.H)
    assert np.all(np.isfinite(a.F))


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_box_clip_lands_inside(v):
    box = BoxDomain([-5.0, -5.0], [10.0, 10.0])
    assert box.contains(box.clip(np.array(v)))
