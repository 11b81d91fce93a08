import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mocondg.benchmark import generate_starts, problem_seed
from mocondg.errors import OutOfDomain
from mocondg.problems import EvalCounter
from mocondg.registry import get_problem
from mocondg.robust import PolyhedralUncertaintySet, RobustConfig, make_robust
from mocondg.subproblems import condg_direction, max_form, proxgrad_direction, support_value

from oracles import max_form_grid, square_problem, support_by_vertices


def robust_small(name, seed, n=None):
    return make_robust(get_problem(name, n), RobustConfig(seed=seed))


class TestSupportValue:
    def test_unit_box_gives_l1_norm(self):
        assert support_value(PolyhedralUncertaintySet(np.eye(2), 1.0), [3.0, -4.0]) == pytest.approx(7.0, abs=1e-12)

    def test_origin(self):
        zset = PolyhedralUncertaintySet([[0.3, 0.9], [0.8, 0.1]], 0.4)
        assert support_value(zset, [0.0, 0.0]) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("method", ["simplex", "highs"])
    def test_matches_vertex_enumeration(self, method):
        rng = np.random.default_rng(17)
        for _ in range(30):
            zset = PolyhedralUncertaintySet(rng.random((3, 3)), 0.5)
            x = rng.normal(scale=5, size=3)
            ref = support_by_vertices(zset.B, zset.delta, x)
            assert support_value(zset, x, method) == pytest.approx(ref, abs=1e-7 * max(1, abs(ref)))

    @given(st.lists(st.floats(-20, 20), min_size=3, max_size=3),
           st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.floats(0, 10))
    def test_homogeneous_and_subadditive(self, x, y, alpha):
        zset = PolyhedralUncertaintySet([[0.6, 0.2, 0.1], [0.3, 0.9, 0.2], [0.1, 0.4, 0.7]], 0.3)
        x, y = np.array(x), np.array(y)
        gx = support_value(zset, x)
        assert support_value(zset, alpha * x) == pytest.approx(alpha * gx, abs=1e-8 * (1 + alpha * abs(gx)))
        assert support_value(zset, x + y) <= gx + support_value(zset, y) + 1e-8


class TestCondGDirection:
    def test_one_dimensional_example(self):
        gap = condg_direction(square_problem(), [1.0])
        assert gap.p[0] == pytest.approx(-1.0, abs=1e-12)
        assert gap.theta == pytest.approx(-4.0, abs=1e-8)
        np.testing.assert_array_equal(gap.direction, gap.p - np.array([1.0]))

    def test_interior_minimizer_is_critical(self):
        gap = condg_direction(square_problem(), [0.0])
        assert gap.theta == pytest.approx(0.0, abs=1e-10)

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomain):
            condg_direction(square_problem(), [2.0])

    def test_counts_lp_solves(self):
        c = EvalCounter()
        condg_direction(robust_small("BK1", 0), [1.0, 1.0], c)
        assert c.lp_solves == 1 and c.grad_evals == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_grid_oracle_on_robust_jos1(self, seed):
        p = robust_small("JOS1", seed, 2)
        x = p.box.sample(np.random.default_rng(seed), 1)[0]
        gap = condg_direction(p, x)
        grid_min, _, bound = max_form_grid(p, x, 201)
        # the LP minimum can only sit below the grid minimum, by at most the bound
        assert gap.theta <= grid_min + 1e-9
        assert grid_min - gap.theta <= bound
        assert gap.info["tau"] == pytest.approx(gap.theta, abs=1e-6)

    @pytest.mark.parametrize("name", ["BK1", "IM1", "VU2", "SP1", "Lov1", "AP1"])
    def test_reformulation_matches_direct_max_form(self, name):
        p = robust_small(name, 2)
        rng = np.random.default_rng(4)
        for x in p.box.sample(rng, 10):
            gap = condg_direction(p, x)
            assert gap.info["tau"] == pytest.approx(max_form(p, x, gap.p), abs=1e-6)
            assert p.box.contains(gap.p, 1e-8)
            assert gap.theta <= 1e-9


class TestProxGradDirection:
    def test_one_dimensional_example(self):
        gap = proxgrad_direction(square_problem(), [1.0], mu=1.0)
        assert gap.p[0] == pytest.approx(-1.0, abs=1e-8)
        assert gap.theta == pytest.approx(-2.0, abs=1e-8)

    def test_unconstrained_prox_step(self):
        # with mu = 4 the minimizer of 2(u - 1) + 2(u - 1)^2 is u = 0.5, value -0.5
        gap = proxgrad_direction(square_problem(), [1.0], mu=4.0)
        assert gap.p[0] == pytest.approx(0.5, abs=1e-8)
        assert gap.theta == pytest.approx(-0.5, abs=1e-8)

    def test_critical_point(self):
        gap = proxgrad_direction(square_problem(), [0.0])
        assert gap.theta == pytest.approx(0.0, abs=1e-10)
        assert gap.p[0] == pytest.approx(0.0, abs=1e-8)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            proxgrad_direction(square_problem(), [0.5], mu=0.0)

    def test_degenerate_program_that_cycled(self):
        # Mehrotra steps cycled on this program until the stall fallback
        p = robust_small("FDS", 1)
        x = generate_starts(p.box, 1000, problem_seed(1, "FDS"))[124]
        gap = proxgrad_direction(p, x)

        def obj(u):
            return max_form(p, x, u) + 0.5 * float((u - x) @ (u - x))

        assert obj(gap.p) == pytest.approx(gap.theta, abs=1e-10)
        rng = np.random.default_rng(0)
        for u in p.box.clip(gap.p + 1e-3 * rng.standard_normal((500, p.n))):
            assert obj(u) >= gap.theta - 1e-7

    @pytest.mark.parametrize("seed", range(4))
    def test_no_better_point_nearby(self, seed):
        # the PG objective is convex, so local optimality of p is global
        p = robust_small("JOS1", seed, 3)
        rng = np.random.default_rng(seed)
        x = p.box.sample(rng, 1)[0]
        gap = proxgrad_direction(p, x, mu=1.0)

        def obj(u):
            return max_form(p, x, u) + 0.5 * float((u - x) @ (u - x))

        assert obj(gap.p) == pytest.approx(gap.theta, abs=1e-12)
        for r in (1e-1, 1e-3):
            for u in p.box.clip(gap.p + r * rng.standard_normal((200, 3))):
                assert obj(u) >= gap.theta - 1e-7


@settings(max_examples=25)
@given(st.sampled_from(["BK1", "IM1", "JOS1", "SP1", "VU2", "MOP2"]), st.integers(0, 10_000))
def test_ordering_condg_below_proxgrad_below_zero(name, seed):
    p = make_robust(get_problem(name, 3 if name == "JOS1" else None), RobustConfig(seed=seed))
    x = p.box.sample(np.random.default_rng(seed), 1)[0]
    t_c = condg_direction(p, x).theta
    t_p = proxgrad_direction(p, x).theta
    assert t_c <= t_p + 1e-9
    assert t_p <= 1e-9
