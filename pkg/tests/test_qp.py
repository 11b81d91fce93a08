import numpy as np
import pytest
from hypothesis import given, strategies as st

from mocondg.qp import KKT_TOL, QpStatus, QuadraticProgram, solve_qp

from oracles import box_qp_projected_gradient, inequality_qp_dual_projected_gradient


def random_spd(rng, n, floor=0.5):
    M = rng.normal(size=(n, n))
    return M @ M.T + floor * np.eye(n)


def assert_kkt(sol):
    assert sol.optimal
    assert max(sol.kkt_residual.values()) <= KKT_TOL


class TestSmallExamples:
    def test_half_square_above_one(self):
        qp = QuadraticProgram.from_blocks([[1.0]], [0.0], A_ge=[[1.0]], b_ge=[1.0])
        sol = solve_qp(qp)
        assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
        assert sol.value == pytest.approx(0.5, abs=1e-8)
        assert_kkt(sol)

    def test_box_projection_is_clamp(self):
        x0 = np.array([3.0, -0.2, -7.0, 0.4])
        lb, ub = -np.ones(4), np.ones(4)
        qp = QuadraticProgram.from_blocks(np.eye(4), -x0, lb=lb, ub=ub)
        sol = solve_qp(qp)
        np.testing.assert_allclose(sol.x, np.clip(x0, lb, ub), atol=1e-8)
        assert_kkt(sol)

    def test_infeasible_rows(self):
        qp = QuadraticProgram.from_blocks([[1.0]], [0.0], A_ge=[[1.0]], b_ge=[2.0], A_ub=[[1.0]], b_ub=[1.0])
        assert solve_qp(qp).status is QpStatus.INFEASIBLE

    def test_row_outside_box_is_infeasible(self):
        qp = QuadraticProgram.from_blocks(np.eye(2), [0.0, 0.0], A_ge=[[1.0, 1.0]], b_ge=[3.0],
                                          lb=[-1, -1], ub=[1, 1])
        assert solve_qp(qp).status is QpStatus.INFEASIBLE

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            QuadraticProgram.from_blocks([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])

    def test_psd_check(self):
        assert QuadraticProgram.from_blocks(np.zeros((2, 2)), [0.0, 0.0]).check_psd()
        assert not QuadraticProgram.from_blocks(-np.eye(2), [0.0, 0.0]).check_psd()

    def test_linear_objective_on_box(self):
        # Q = 0 reduces to an LP; optimum at the cheap corner
        qp = QuadraticProgram.from_blocks(np.zeros((2, 2)), [1.0, -2.0], lb=[-1, -1], ub=[1, 1])
        sol = solve_qp(qp)
        np.testing.assert_allclose(sol.x, [-1.0, 1.0], atol=1e-6)
        assert sol.value == pytest.approx(-3.0, abs=1e-6)


class TestOracles:
    def test_box_qps_match_projected_gradient(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(1, 7))
            Q = random_spd(rng, n)
            c = rng.normal(scale=3, size=n)
            lb, ub = -rng.uniform(0.1, 2, n), rng.uniform(0.1, 2, n)
            ref = box_qp_projected_gradient(Q, c, lb, ub, tol=1e-12)
            sol = solve_qp(QuadraticProgram.from_blocks(Q, c, lb=lb, ub=ub))
            np.testing.assert_allclose(sol.x, ref, atol=1e-6)
            assert_kkt(sol)

    def test_inequality_qps_match_dual_projected_gradient(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            n = int(rng.integers(1, 7))
            k = int(rng.integers(1, 7))
            Q = random_spd(rng, n, floor=1.0)
            c = rng.normal(scale=3, size=n)
            A = rng.normal(size=(k, n))
            b = A @ rng.normal(size=n) + rng.uniform(0, 0.5, k)
            ref = inequality_qp_dual_projected_gradient(Q, c, A, b)
            sol = solve_qp(QuadraticProgram.from_blocks(Q, c, A_ub=A, b_ub=b))
            np.testing.assert_allclose(sol.x, ref, atol=1e-6)
            assert_kkt(sol)

    def test_value_not_below_dual_bound(self):
        rng = np.random.default_rng(33)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            Q = random_spd(rng, n)
            A = rng.normal(size=(2, n))
            qp = QuadraticProgram.from_blocks(Q, rng.normal(size=n), A_ub=A, b_ub=A @ np.zeros(n) + 1.0,
                                              lb=-np.ones(n), ub=np.ones(n))
            sol = solve_qp(qp)
            assert sol.value >= sol.dual_value - 1e-7
            assert sol.value - sol.dual_value <= 1e-7 * (1 + abs(sol.value))


@given(st.integers(0, 2**32 - 1))
def test_kkt_contract_on_random_mixed_programs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    # positive semidefinite, possibly singular
    M = rng.normal(size=(n, int(rng.integers(1, n + 1))))
    Q = M @ M.T
    lb, ub = -np.full(n, 2.0), np.full(n, 2.0)
    x_in = rng.uniform(-1, 1, n)
    A = rng.normal(size=(2, n))
    E = rng.normal(size=(1, n))
    qp = QuadraticProgram.from_blocks(Q, rng.normal(size=n), A_ub=A, b_ub=A @ x_in + 0.3,
                                      A_eq=E, b_eq=E @ x_in, lb=lb, ub=ub)
    sol = solve_qp(qp)
    assert_kkt(sol)
    assert np.all(sol.x >= lb - 1e-8) and np.all(sol.x <= ub + 1e-8)


def test_deterministic():
    rng = np.random.default_rng(4)
    Q = random_spd(rng, 3)
    qp = QuadraticProgram.from_blocks(Q, rng.normal(size=3), lb=-np.ones(3), ub=np.ones(3))
    a, b = solve_qp(qp), solve_qp(qp)
    np.testing.assert_array_equal(a.x, b.x)
