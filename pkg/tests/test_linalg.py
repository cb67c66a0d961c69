import numpy as np
import pytest
from scipy.optimize import linprog, minimize

from gpcert.errors import Infeasible, NotPositiveDefinite, Unbounded
from gpcert.linalg import (
    LpProblem,
    QpProblem,
    cho_solve,
    cholesky_factor,
    kkt_residual,
    solve_convex_qp,
    solve_lp,
    sym_eigen,
)


def _spd(rng, n):
    B = rng.normal(size=(n, n))
    return B @ B.T + n * np.eye(n)


class TestCholesky:
    def test_solve(self):
        rng = np.random.default_rng(0)
        A = _spd(rng, 12)
        b = rng.normal(size=12)
        x = cho_solve(cholesky_factor(A), b)
        np.testing.assert_allclose(A @ x, b, atol=1e-10)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_factor(np.diag([1.0, -1.0]))


class TestSymEigen:
    @pytest.mark.parametrize("n", [1, 2, 7, 30])
    def test_jacobi_matches_lapack(self, n):
        rng = np.random.default_rng(n)
        A = rng.normal(size=(n, n))
        A = A + A.T
        U, lam = sym_eigen(A, method="jacobi")
        U2, lam2 = sym_eigen(A, method="lapack")
        np.testing.assert_allclose(lam, lam2, atol=1e-10)
        np.testing.assert_allclose(U @ np.diag(lam) @ U.T, A, atol=1e-10)
        np.testing.assert_allclose(U.T @ U, np.eye(n), atol=1e-10)
        assert np.all(np.diff(lam) <= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestSimplex:
    def test_random_against_highs(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n, m = rng.integers(2, 12), rng.integers(1, 10)
            A = rng.normal(size=(m, n))
            x0 = rng.uniform(-1, 1, n)
            b = A @ x0 + rng.uniform(0, 1, m)
            lo, hi = -np.ones(n) * 2, np.ones(n) * 2
            c = rng.normal(size=n)
            x, val = solve_lp(LpProblem(c, A, b, lo, hi))
            ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(lo, hi)), method="highs")
            assert abs(val - ref.fun) <= 1e-8 * max(1.0, abs(ref.fun))
            assert np.all(A @ x <= b + 1e-8) and np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)

    def test_start_upper_hint_same_optimum(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(5, 6))
        b = A @ rng.uniform(0, 1, 6) + 0.1
        p = LpProblem(rng.normal(size=6), A, b, np.zeros(6), np.ones(6))
        _, v1 = solve_lp(p)
        _, v2 = solve_lp(p, start_upper=np.ones(6, dtype=bool))
        assert abs(v1 - v2) <= 1e-9

    def test_infeasible(self):
        p = LpProblem(np.ones(1), np.array([[1.0]]), np.array([-1.0]), np.zeros(1), np.ones(1))
        with pytest.raises(Infeasible):
            solve_lp(p)

    def test_unbounded(self):
        p = LpProblem(np.array([-1.0]), np.zeros((0, 1)), np.zeros(0), np.zeros(1), np.array([np.inf]))
        with pytest.raises(Unbounded):
            solve_lp(p)


class TestConvexQp:
    def test_random_against_slsqp(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n, m = rng.integers(2, 8), rng.integers(1, 6)
            B = rng.normal(size=(n, n))
            Q = B @ B.T + 0.1 * np.eye(n)
            c = rng.normal(size=n)
            A = rng.normal(size=(m, n))
            b = A @ rng.uniform(-0.5, 0.5, n) + rng.uniform(0, 1, m)
            p = QpProblem(Q, c, A, b, -np.ones(n), np.ones(n))
            res = solve_convex_qp(p)
            ref = minimize(lambda z: 0.5 * z @ Q @ z + c @ z, np.zeros(n), jac=lambda z: Q @ z + c,
                           bounds=[(-1, 1)] * n, constraints=[{"type": "ineq", "fun": lambda z: b - A @ z}],
                           method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
            assert res.value <= ref.fun + 1e-6
            assert res.kkt_residual <= 1e-6
            assert kkt_residual(p, res.x) <= 1e-5

    def test_unconstrained_minimiser(self):
        Q = np.diag([2.0, 4.0])
        c = np.array([-2.0, -4.0])
        p = QpProblem(Q, c, np.zeros((0, 2)), np.zeros(0), -10 * np.ones(2), 10 * np.ones(2))
        np.testing.assert_allclose(solve_convex_qp(p).x, [1.0, 1.0], atol=1e-7)
