"""Tests for the log-barrier kernel used by the range subproblems."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from swarmcap.barrier import BarrierSettings, ConstraintBlock, barrier_minimize
from swarmcap.errors import FeasibilityError


def quadratic(Q, c):
    def f(x):
        return 0.5 * x @ Q @ x + c @ x, Q @ x + c, Q

    return f


def disk_block(radius=1.0):
    def fn(xl):
        vals = np.sum(xl**2, axis=1) - radius**2
        return vals, 2 * xl, np.broadcast_to(2 * np.eye(xl.shape[1]), (len(xl), xl.shape[1], xl.shape[1]))

    return ConstraintBlock([[0, 1]], fn, "disk")


class TestAnalytic:
    def test_projection_onto_halfplane(self):
        obj = quadratic(2 * np.eye(2), np.array([-4.0, -4.0]))
        blk = ConstraintBlock.linear([[0, 1]], [[1.0, 1.0]], [1.0])
        res = barrier_minimize(obj, [blk], np.zeros(2))
        np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-7)
        # objective shifted by the constant 8
        assert res.objective + 8 == pytest.approx(4.5, abs=1e-7)

    def test_linear_over_disk(self):
        obj = lambda x: (-(x[0] + x[1]), np.array([-1.0, -1.0]), np.zeros((2, 2)))
        res = barrier_minimize(obj, [disk_block()], np.zeros(2))
        np.testing.assert_allclose(res.x, [1 / math.sqrt(2)] * 2, atol=1e-6)

    def test_inactive_constraint(self):
        obj = quadratic(np.eye(2), np.array([-0.1, 0.2]))
        res = barrier_minimize(obj, [disk_block()], np.zeros(2))
        np.testing.assert_allclose(res.x, [0.1, -0.2], atol=1e-7)

    def test_unconstrained(self):
        obj = quadratic(np.diag([1.0, 4.0]), np.array([-1.0, -4.0]))
        res = barrier_minimize(obj, [], np.zeros(2))
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-10)

    def test_history_monotone_in_t(self):
        obj = quadratic(2 * np.eye(2), np.array([-4.0, -4.0]))
        blk = ConstraintBlock.linear([[0, 1]], [[1.0, 1.0]], [1.0])
        res = barrier_minimize(obj, [blk], np.zeros(2))
        ts = [t for t, _ in res.history]
        assert ts == sorted(ts) and res.gap > 0


class TestPhaseOne:
    def test_infeasible_start_recovered(self):
        obj = quadratic(2 * np.eye(2), np.zeros(2))
        blk = ConstraintBlock.linear([[0], [1]], [[-1.0], [-1.0]], [-3.0, -1.0])
        res = barrier_minimize(obj, [blk], np.zeros(2))
        np.testing.assert_allclose(res.x, [3.0, 1.0], atol=1e-6)

    def test_empty_feasible_set(self):
        obj = quadratic(np.eye(1), np.zeros(1))
        blk = ConstraintBlock.linear([[0], [0]], [[1.0], [-1.0]], [0.0, -1.0])
        with pytest.raises(FeasibilityError):
            barrier_minimize(obj, [blk], np.zeros(1))


class TestAgainstSlsqp:
    def test_random_qps(self, rng):
        for _ in range(20):
            n, m = 4, 6
            L = rng.normal(size=(n, n))
            Q = L @ L.T + 0.5 * np.eye(n)
            c = rng.normal(size=n)
            A = rng.normal(size=(m, n))
            b = rng.uniform(0.5, 2.0, m)
            blk = ConstraintBlock.linear(np.tile(np.arange(n), (m, 1)), A, b)
            res = barrier_minimize(quadratic(Q, c), [blk], np.zeros(n))
            ref = minimize(
                lambda x: 0.5 * x @ Q @ x + c @ x,
                np.zeros(n),
                jac=lambda x: Q @ x + c,
                constraints=[{"type": "ineq", "fun": lambda x: b - A @ x, "jac": lambda x: -A}],
                method="SLSQP",
                options={"ftol": 1e-12, "maxiter": 500},
            )
            assert ref.success
            assert res.objective == pytest.approx(ref.fun, abs=1e-6)
            assert np.all(A @ res.x <= b + 1e-9)

    def test_tight_tolerance_setting(self):
        obj = quadratic(2 * np.eye(2), np.array([-4.0, -4.0]))
        blk = ConstraintBlock.linear([[0, 1]], [[1.0, 1.0]], [1.0])
        res = barrier_minimize(obj, [blk], np.zeros(2), BarrierSettings(gap_tol=1e-12))
        np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-9)
