import math
import unittest

import numpy as np
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal
from scipy.optimize import linprog
from scipy.optimize import lsq_linear

from mindkit import solvers
from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import CanonicalBasis
from mindkit.dictionaries import HaarBasis
from mindkit.dictionaries import IntervalSystem
from mindkit.dictionaries import basis_probes
from mindkit.dictionaries import block_probes
from mindkit.dictionaries import identity_probe
from mindkit.dictionaries import interval_probes
from mindkit.exceptions import InfeasibleError
from mindkit.exceptions import InputError
from mindkit.exceptions import UnsupportedError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.multiscale import MultiscaleConstraint
from mindkit.multiscale import is_feasible
from mindkit.multiscale import universal_threshold
from mindkit.solvers import MindProblem
from mindkit.solvers import Regularizer
from mindkit.thresholding import ShrinkageRule
from mindkit.thresholding import block_shrink
from mindkit.thresholding import eta_theta
from mindkit.thresholding import wavelet_threshold


def _problem(y, probes, q, reg, op=None):
    y = np.asarray(y, dtype=float)
    if op is None:
        op = DesignOperator.identity(y.size)
    return MindProblem(op, Observation(y, 1.0), MultiscaleConstraint(probes, q), reg)


class RegularizerTest(unittest.TestCase):
    def test_values(self):
        """
        Every convex kind evaluates to its formula.
        """
        beta = np.array([0.0, 1.0, 3.0])
        self.assertEqual(Regularizer.tv()(beta), 3.0)
        self.assertEqual(Regularizer.tv(2)(beta), 1.0)
        self.assertEqual(Regularizer.sq_diff()(beta), 2.5)
        self.assertAlmostEqual(Regularizer.l2_sq()(beta), 5.0)
        self.assertAlmostEqual(
            Regularizer.sobolev(1, 2)(np.array([3.0, 4.0])), 6.0
        )
        self.assertAlmostEqual(Regularizer.sobolev(0, math.inf)(beta), 3.0)
        self.assertEqual(Regularizer.l1_coeff(weights=2.0)(beta), 8.0)
        partition = BlockPartition.contiguous(3, 2)
        self.assertAlmostEqual(
            Regularizer.block_l1(partition, [1.0, 2.0])(beta), 1.0 + 6.0
        )
        self.assertEqual(Regularizer.jump_count()(np.array([0, 0, 1, 1, 2.0])), 2)

    def test_basis_coefficients(self):
        """
        l1_coeff with a basis sums the absolute basis coefficients.
        """
        basis = HaarBasis.for_length(4)
        beta = np.array([1.0, 1.0, 1.0, 1.0])
        self.assertAlmostEqual(Regularizer.l1_coeff(basis)(beta), 2.0)

    def test_invalid(self):
        """
        Unsupported exponents, missing partitions and negative weights.
        """
        with self.assertRaises(UnsupportedError):
            Regularizer.sobolev(1, 3)
        with self.assertRaises(InputError):
            Regularizer(solvers.RegularizerKind.BLOCK_L1)
        with self.assertRaises(InputError):
            Regularizer.l1_coeff(weights=-1.0)
        with self.assertRaises(InputError):
            Regularizer.tv(0)
        self.assertFalse(Regularizer.jump_count().convex)

    def test_difference_matrix(self):
        """
        Second differences of squares are constant.
        """
        d = solvers.difference_matrix(4, 2)
        self.assertEqual(d.shape, (2, 4))
        assert_array_equal(d @ np.array([1.0, 4.0, 9.0, 16.0]), [2.0, 2.0])
        with self.assertRaises(InputError):
            solvers.difference_matrix(3, 3)


class ProjectionTest(unittest.TestCase):
    def test_project_ball(self):
        """
        Projections onto l2, l-infinity and l1 balls.
        """
        assert_allclose(solvers.project_ball([3.0, 4.0], 5.0), [3.0, 4.0])
        assert_allclose(solvers.project_ball([3.0, 4.0], 1.0), [0.6, 0.8])
        assert_allclose(solvers.project_ball([3.0, -4.0], 1.0, "linf"), [1.0, -1.0])
        assert_allclose(solvers.project_ball([3.0, 1.0], 2.0, "l1"), [2.0, 0.0])
        assert_allclose(solvers.project_ball([3.0, -1.0], 0.0, "l1"), [0.0, 0.0])
        with self.assertRaises(InputError):
            solvers.project_ball([1.0], -1.0)
        with self.assertRaises(InputError):
            solvers.project_ball([1.0], 1.0, "l3")

    def test_project_l1_is_closest(self):
        """
        The l1 projection lands on the sphere and beats random sphere points.
        """
        rng = np.random.default_rng(0)
        v = rng.standard_normal(6) * 3
        x = solvers.project_ball(v, 2.0, "l1")
        self.assertAlmostEqual(float(np.abs(x).sum()), 2.0)
        for _ in range(200):
            z = rng.standard_normal(6)
            z *= 2.0 / np.abs(z).sum()
            self.assertLessEqual(
                np.linalg.norm(v - x), np.linalg.norm(v - z) + 1e-12
            )


class ProxTVTest(unittest.TestCase):
    def test_examples(self):
        """
        A constant vector is a fixed point; two points move together by 2 gamma.
        """
        assert_array_equal(solvers.prox_tv_1d(np.full(5, 2.0), 1.0), np.full(5, 2.0))
        assert_allclose(solvers.prox_tv_1d([0.0, 1.0], 0.25), [0.25, 0.75])
        assert_allclose(solvers.prox_tv_1d([0.0, 1.0], 1.0), [0.5, 0.5])
        assert_array_equal(solvers.prox_tv_1d([1.0, 2.0], 0.0), [1.0, 2.0])

    def test_against_bounded_least_squares(self):
        """
        The taut string matches the dual box-constrained least squares
        solution on random instances.
        """
        n = 10
        dt = solvers.difference_matrix(n).toarray().T
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = rng.standard_normal(n) * rng.uniform(0.5, 3.0)
            gamma = rng.uniform(0.05, 2.0)
            dual = lsq_linear(dt, v, bounds=(-gamma, gamma), method="bvls", tol=1e-14)
            assert_allclose(solvers.prox_tv_1d(v, gamma), v - dt @ dual.x, atol=1e-8)

    def test_invalid(self):
        """
        Matrices and negative penalties are rejected.
        """
        with self.assertRaises(InputError):
            solvers.prox_tv_1d(np.ones((2, 2)), 1.0)
        with self.assertRaises(InputError):
            solvers.prox_tv_1d(np.ones(3), -1.0)


class GroupLassoTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(2)
        cls.y = rng.normal(0.0, 2.0, 24)
        cls.X = rng.standard_normal((20, 8))
        beta = np.array([3.0, 0, 0, -2.0, 0, 0, 1.0, 0])
        cls.z = cls.X @ beta + rng.standard_normal(20)

    def test_identity_singletons(self):
        """
        With X = I and singletons the group lasso is soft thresholding.
        """
        out = solvers.group_lasso_solve(
            np.eye(24), self.y, BlockPartition.singletons(24), 1.0, 1.2
        )
        assert_allclose(out, eta_theta(self.y, 1.2, 1), atol=1e-12)

    def test_identity_blocks(self):
        """
        With X = I the group lasso is block soft thresholding at gamma w_a.
        """
        partition = BlockPartition.contiguous(24, 4)
        w = np.linspace(0.5, 2.0, 6)
        out = solvers.group_lasso_solve(
            DesignOperator.identity(24), self.y, partition, w, 1.5
        )
        assert_allclose(out, block_shrink(self.y, partition, 1.5 * w), atol=1e-12)

    def test_lasso_kkt(self):
        """
        The lasso solution satisfies the KKT conditions.
        """
        gamma = 0.3 * float(np.abs(self.X.T @ self.z).max())
        beta = solvers.lasso_solve(self.X, self.z, gamma)
        correlation = self.X.T @ (self.z - self.X @ beta)
        self.assertLessEqual(float(np.abs(correlation).max()), gamma * (1 + 1e-5))
        active = beta != 0
        assert_allclose(
            correlation[active], gamma * np.sign(beta[active]), rtol=1e-4
        )

    def test_large_gamma(self):
        """
        Above the null threshold the solution is exactly zero.
        """
        gamma = 1.01 * float(np.abs(self.X.T @ self.z).max())
        assert_array_equal(solvers.lasso_solve(self.X, self.z, gamma), np.zeros(8))

    def test_invalid(self):
        """
        Mismatched sizes and nonpositive weights.
        """
        with self.assertRaises(InputError):
            solvers.group_lasso_solve(
                self.X, self.z, BlockPartition.singletons(7), 1.0, 1.0
            )
        with self.assertRaises(InputError):
            solvers.group_lasso_solve(
                self.X, self.z, BlockPartition.singletons(8), 0.0, 1.0
            )
        with self.assertRaises(InputError):
            solvers.group_lasso_solve(
                self.X, self.z, BlockPartition.singletons(8), 1.0, -1.0
            )

    def test_conjugate(self):
        """
        The conjugate is 0 inside the dual ball, boundary included.
        """
        partition = BlockPartition.contiguous(4, 4)
        mu = np.array([3.0, 4.0, 0.0, 0.0])
        self.assertEqual(solvers.conjugate_block_l1(np.zeros(4), partition, 5.0), 0.0)
        self.assertEqual(solvers.conjugate_block_l1(mu, partition, 5.0), 0.0)
        self.assertEqual(
            solvers.conjugate_block_l1(1.01 * mu, partition, 5.0), math.inf
        )

    def test_dual_equivalence(self):
        """
        The group lasso and its constrained reformulation predict the same.
        """
        partition = BlockPartition.contiguous(8, 2)
        gamma = 0.3 * float(np.abs(self.X.T @ self.z).max())
        report = solvers.verify_dual_equivalence(
            self.X, self.z, partition, 1.0, gamma
        )
        self.assertLess(report.prediction_gap, 1e-4)
        self.assertLessEqual(report.constraint_slack, 1e-5 * gamma)


class PdhgTest(unittest.TestCase):
    def test_minimum_norm_projection(self):
        """
        With one identity probe the minimum-norm estimate shrinks Y radially.
        """
        problem = _problem([3.0, 4.0], identity_probe(2), 1.0, Regularizer.l2_sq())
        report = solvers.pdhg_solve(problem)
        assert_allclose(report.beta_hat, [2.4, 3.2], atol=1e-5)
        self.assertLessEqual(report.constraint_slack, 1e-6)
        self.assertTrue(report.converged)

    def test_soft_threshold_equivalence(self):
        """
        Minimum l1 norm of Haar coefficients under per-coefficient
        thresholds is soft thresholding, to 1e-6 on every instance.
        """
        basis = HaarBasis.for_length(64)
        base = universal_threshold(64, 1.0)
        rng = np.random.default_rng(3)
        for trial in range(100):
            y = basis.synthesize(
                np.where(rng.random(64) < 0.2, rng.normal(0.0, 5.0, 64), 0.0)
            ) + rng.standard_normal(64)
            q = base * rng.uniform(0.5, 1.5, 64)
            report = solvers.pdhg_solve(
                _problem(y, basis_probes(basis, q), 1.0, Regularizer.l1_coeff(basis))
            )
            expected = wavelet_threshold(y, basis, ShrinkageRule.soft(q))
            assert_allclose(report.beta_hat, expected, atol=1e-6, err_msg=str(trial))

    def test_slack_matches_recomputation(self):
        """
        The reported slack is the constraint value at the returned estimate.
        """
        basis = HaarBasis.for_length(32)
        y = np.random.default_rng(4).standard_normal(32)
        problem = _problem(y, basis_probes(basis), 1.5, Regularizer.tv())
        report = solvers.pdhg_solve(problem)
        _, slack = is_feasible(
            report.beta_hat, problem.obs, problem.op, problem.constraint
        )
        self.assertAlmostEqual(report.constraint_slack, slack, delta=1e-7)
        self.assertLessEqual(slack, 1e-6)

    def test_residuals_decrease_by_window(self):
        """
        The largest residual in each block of 100 iterations does not grow
        from one block to the next, and the last block ends far below the first.
        """
        rng = np.random.default_rng(12)
        y = np.repeat([0.0, 2.0], 16) + 0.3 * rng.standard_normal(32)
        probes = interval_probes(IntervalSystem.build(32, "all"))
        report = solvers.pdhg_solve(
            _problem(y, probes, 1.0, Regularizer.tv()), max_iter=3000, tol=1e-10
        )
        windows = report.gap_windows(100)
        self.assertGreaterEqual(windows.size, 3)
        for earlier, later in zip(windows[:-1], windows[1:]):
            self.assertLessEqual(later, earlier * 1.05 + 1e-12)
        self.assertLess(windows[-1], 1e-2 * windows[0])

    def test_dantzig_selector(self):
        """
        The Dantzig selector matches the linear program.
        """
        rng = np.random.default_rng(5)
        n, p = 30, 6
        X = rng.standard_normal((n, p)) / math.sqrt(n)
        y = X @ np.array([2.0, 0, 0, -1.5, 0, 0]) + 0.1 * rng.standard_normal(n)
        q = 0.3 * float(np.abs(X.T @ y).max())
        gram, corr = X.T @ X, X.T @ y
        eye = np.eye(p)
        # Variables (beta, t): min sum t, |beta| <= t, |corr - gram beta| <= q.
        zero = np.zeros((p, p))
        a_ub = np.block([[eye, -eye], [-eye, -eye], [-gram, zero], [gram, zero]])
        b_ub = np.concatenate([np.zeros(2 * p), q - corr, q + corr])
        lp = linprog(
            np.concatenate([np.zeros(p), np.ones(p)]),
            A_ub=a_ub,
            b_ub=b_ub,
            bounds=[(None, None)] * p + [(0, None)] * p,
            method="highs",
        )
        self.assertTrue(lp.success)
        report = solvers.dantzig_selector(
            DesignOperator.dense(X), Observation(y, 1.0), q
        )
        self.assertAlmostEqual(report.objective, lp.fun, delta=1e-4 * max(1.0, lp.fun))
        self.assertLessEqual(report.constraint_slack, 1e-5 * q)

    def test_nemirovskii_reverse(self):
        """
        The smoothest signal under the interval constraint is feasible and
        no rougher than the data.
        """
        rng = np.random.default_rng(6)
        n = 16
        y = np.repeat([0.0, 2.0], n // 2) + 0.3 * rng.standard_normal(n)
        probes = interval_probes(IntervalSystem.build(n, "all"))
        reg = Regularizer.sobolev(1, 2)
        report = solvers.pdhg_solve(_problem(y, probes, 1.0, reg))
        self.assertLessEqual(report.constraint_slack, 1e-4)
        self.assertLessEqual(report.objective, reg(y))

    def test_hybrid_tv_wavelet(self):
        """
        Total variation under the Haar coefficient constraint is no rougher
        than soft thresholding, which is feasible.
        """
        basis = HaarBasis.for_length(64)
        rng = np.random.default_rng(7)
        y = np.repeat([0.0, 3.0, 1.0, -1.0], 16) + rng.standard_normal(64)
        q = universal_threshold(64, 1.0)
        reg = Regularizer.tv()
        report = solvers.pdhg_solve(_problem(y, basis_probes(basis), q, reg))
        soft = wavelet_threshold(y, basis, ShrinkageRule.soft(q))
        self.assertLessEqual(report.objective, reg(soft) + 1e-4)
        self.assertLessEqual(report.constraint_slack, 1e-6 * q)

    def test_trend_filtering(self):
        """
        Second-order total variation within an l2 ball around the data.
        """
        t = np.linspace(0, 1, 40)
        y = np.abs(t - 0.5) + 0.05 * np.random.default_rng(8).standard_normal(40)
        reg = Regularizer.tv(2)
        report = solvers.pdhg_solve(_problem(y, identity_probe(40), 0.4, reg))
        self.assertLessEqual(report.constraint_slack, 1e-5)
        self.assertLess(report.objective, reg(y))
        self.assertLessEqual(np.linalg.norm(y - report.beta_hat), 0.4 * (1 + 1e-5))

    def test_errors(self):
        """
        Non-convex regularizers and empty constraint sets are reported.
        """
        with self.assertRaises(UnsupportedError):
            solvers.pdhg_solve(
                _problem([1.0, 2.0], identity_probe(2), 1.0, Regularizer.jump_count())
            )
        with self.assertRaises(InfeasibleError) as ctx:
            solvers.pdhg_solve(
                _problem([1.0, 2.0], identity_probe(2), -1.0, Regularizer.l2_sq())
            )
        self.assertEqual(ctx.exception.slack, 1.0)
        with self.assertRaises(InputError):
            _problem([1.0, 2.0], identity_probe(3), 1.0, Regularizer.l2_sq())


class PenalizedTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.y = np.random.default_rng(9).normal(0.0, 2.0, 16)
        cls.op = DesignOperator.identity(16)

    def test_closed_forms(self):
        """
        Ridge, spline, total variation and shrinkage closed forms.
        """
        y, op = self.y, self.op
        assert_allclose(
            solvers.penalized_solve(op, y, Regularizer.l2_sq(), 3.0), y / 4.0
        )
        d = solvers.difference_matrix(16).toarray()
        assert_allclose(
            solvers.penalized_solve(op, y, Regularizer.sq_diff(), 2.0),
            np.linalg.solve(np.eye(16) + 2.0 * d.T @ d, y),
            atol=1e-10,
        )
        assert_allclose(
            solvers.penalized_solve(op, y, Regularizer.tv(), 0.7),
            solvers.prox_tv_1d(y, 0.7),
        )
        basis = HaarBasis.for_length(16)
        assert_allclose(
            solvers.penalized_solve(op, y, Regularizer.l1_coeff(basis), 1.1),
            wavelet_threshold(y, basis, ShrinkageRule.soft(1.1)),
            atol=1e-12,
        )
        partition = BlockPartition.contiguous(16, 4)
        assert_allclose(
            solvers.penalized_solve(op, y, Regularizer.block_l1(partition), 2.0),
            block_shrink(y, partition, 2.0),
            atol=1e-12,
        )

    def test_engine_matches_taut_string(self):
        """
        Through a general design the primal-dual engine reaches the
        taut-string solution.
        """
        dense = DesignOperator.dense(np.eye(16))
        reg = Regularizer.tv()
        beta = solvers.penalized_solve(dense, self.y, reg, 0.7)
        exact = solvers.prox_tv_1d(self.y, 0.7)

        def objective(b):
            return 0.5 * float(np.sum((self.y - b) ** 2)) + 0.7 * reg(b)

        self.assertAlmostEqual(objective(beta), objective(exact), delta=1e-5)
        assert_allclose(beta, exact, atol=1e-3)

    def test_ridge_with_design(self):
        """
        Ridge through a dense design solves the normal equations.
        """
        X = np.random.default_rng(10).standard_normal((16, 5))
        beta = solvers.penalized_solve(
            DesignOperator.dense(X), self.y, Regularizer.l2_sq(), 0.5
        )
        assert_allclose(
            beta, np.linalg.solve(X.T @ X + 0.5 * np.eye(5), X.T @ self.y)
        )

    def test_errors(self):
        """
        Negative multipliers, non-convex kinds and wrong lengths.
        """
        with self.assertRaises(InputError):
            solvers.penalized_solve(self.op, self.y, Regularizer.tv(), -1.0)
        with self.assertRaises(UnsupportedError):
            solvers.penalized_solve(self.op, self.y, Regularizer.jump_count(), 1.0)
        with self.assertRaises(InputError):
            solvers.penalized_solve(self.op, self.y[:3], Regularizer.tv(), 1.0)


class FidelityConstrainedTest(unittest.TestCase):
    def test_l2_closed_form(self):
        """
        Under 1/2 ||beta||^2 <= c the solution is Y pulled into the ball.
        """
        y = np.array([3.0, 4.0])
        report = solvers.fidelity_constrained_solve(
            DesignOperator.identity(2), y, Regularizer.l2_sq(), 2.0
        )
        assert_allclose(report.beta_hat, y * min(1.0, 2.0 / 5.0), atol=1e-6)
        report = solvers.fidelity_constrained_solve(
            DesignOperator.identity(2), y, Regularizer.l2_sq(), 20.0
        )
        assert_allclose(report.beta_hat, y, atol=1e-6)

    def test_tv_round_trip(self):
        """
        Constraining TV at the value of the penalized solution gives back the
        same fidelity.
        """
        y = np.random.default_rng(11).normal(0.0, 1.0, 24)
        reg = Regularizer.tv()
        penalized = solvers.prox_tv_1d(y, 0.5)
        c = reg(penalized)
        report = solvers.fidelity_constrained_solve(
            DesignOperator.identity(24), y, reg, c
        )
        fidelity = 0.5 * float(np.sum((y - penalized) ** 2))
        self.assertAlmostEqual(report.objective, fidelity, delta=1e-4 * fidelity)
        self.assertLessEqual(report.constraint_slack, 1e-6 * max(1.0, c))

    def test_errors(self):
        """
        Negative levels are infeasible; block_l1 has no sublevel projection.
        """
        op = DesignOperator.identity(4)
        with self.assertRaises(InfeasibleError):
            solvers.fidelity_constrained_solve(op, np.ones(4), Regularizer.tv(), -1.0)
        with self.assertRaises(UnsupportedError):
            solvers.fidelity_constrained_solve(
                op,
                np.ones(4),
                Regularizer.block_l1(BlockPartition.contiguous(4, 2)),
                1.0,
            )


class DiscrepancyTest(unittest.TestCase):
    def test_ridge_closed_form(self):
        """
        For ridge shrinkage the multiplier is q / (||Y|| - q).
        """
        y = np.array([3.0, 4.0, 12.0])
        q = 5.0
        result = solvers.discrepancy_calibrate(
            DesignOperator.identity(3), Observation(y, 1.0), Regularizer.l2_sq(), q
        )
        self.assertFalse(result.degenerate)
        self.assertAlmostEqual(result.gamma, q / (13.0 - q), delta=1e-6)
        self.assertAlmostEqual(result.residual, q, delta=1e-6)
        assert_allclose(result.beta_hat, y / (1 + result.gamma), atol=1e-6)

    def test_degenerate(self):
        """
        When zero is feasible there is nothing to calibrate.
        """
        y = np.array([3.0, 4.0])
        result = solvers.discrepancy_calibrate(
            DesignOperator.identity(2), Observation(y, 1.0), Regularizer.l2_sq(), 5.0
        )
        self.assertTrue(result.degenerate)
        self.assertEqual(result.gamma, 0.0)
        assert_array_equal(result.beta_hat, [0.0, 0.0])

    def test_tv_optimality(self):
        """
        The calibrated TV estimate meets the residual and is no rougher than
        other points of the residual ball.
        """
        rng = np.random.default_rng(12)
        y = np.repeat([0.0, 2.0, -1.0, 1.0], 8) + 0.5 * rng.standard_normal(32)
        q = 0.5 * float(np.linalg.norm(y - y.mean()))
        reg = Regularizer.tv()
        result = solvers.discrepancy_calibrate(
            DesignOperator.identity(32), Observation(y, 1.0), reg, q
        )
        self.assertFalse(result.degenerate)
        self.assertAlmostEqual(result.residual, q, delta=1e-6)
        best = reg(result.beta_hat)
        for _ in range(50):
            candidate = result.beta_hat + 0.2 * rng.standard_normal(32)
            feasible = y - solvers.project_ball(y - candidate, q)
            self.assertGreaterEqual(reg(feasible), best - 1e-6)

    def test_minimizer_subspace(self):
        """
        Constants minimize TV; polynomials of degree < k minimize k-th
        differences.
        """
        self.assertEqual(solvers.minimizer_subspace(Regularizer.tv(), 5).shape, (5, 1))
        self.assertEqual(
            solvers.minimizer_subspace(Regularizer.sq_diff(2), 5).shape, (5, 2)
        )
        self.assertEqual(solvers.minimizer_subspace(Regularizer.l2_sq(), 5).shape[1], 0)


class BlockProbeConstraintTest(unittest.TestCase):
    def test_block_constraint_is_block_soft(self):
        """
        Minimum norm under block ball constraints is block soft thresholding.
        """
        y = np.random.default_rng(13).normal(0.0, 2.0, 16)
        partition = BlockPartition.contiguous(16, 4)
        probes = block_probes(CanonicalBasis(16), partition, 1.0)
        report = solvers.pdhg_solve(_problem(y, probes, 1.5, Regularizer.l2_sq()))
        assert_allclose(report.beta_hat, block_shrink(y, partition, 1.5), atol=1e-5)
