import unittest

import numpy as np
from numpy.testing import assert_array_equal

from mindkit import experiments
from mindkit.changepoint import bic_penalty
from mindkit.exceptions import InputError
from mindkit.multiscale import gumbel_threshold
from mindkit.multiscale import universal_threshold


class ThresholdingComparisonTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.result = experiments.thresholding_comparison(n=256, sigma=0.1, seed=1)

    def test_methods(self):
        """
        Every rule is reported with the universal threshold.
        """
        self.assertEqual(
            set(self.result.metrics), set(experiments.THRESHOLDING_METHODS)
        )
        self.assertAlmostEqual(self.result.q, universal_threshold(256, 0.1))
        for estimate in self.result.estimates.values():
            self.assertEqual(estimate.shape, (256,))

    def test_hard_keeps_large_coefficients(self):
        """
        Hard thresholding leaves coefficients above the threshold untouched.
        """
        self.assertTrue(self.result.hard_exact)

    def test_large_coefficient_bias(self):
        """
        Garrote and hard thresholding shrink large coefficients less than
        soft thresholding.
        """
        metrics = self.result.metrics
        self.assertLessEqual(metrics["garrote"].large_mse, metrics["soft"].large_mse)
        self.assertLessEqual(metrics["hard"].large_mse, metrics["soft"].large_mse)
        self.assertLessEqual(metrics["soft"].kept, metrics["hard"].kept)

    def test_gumbel_level(self):
        """
        Giving a level switches to the Gumbel threshold.
        """
        result = experiments.thresholding_comparison(n=64, sigma=0.2, alpha=0.1)
        self.assertAlmostEqual(result.q, gumbel_threshold(64, 0.2, 0.1))

    def test_dyadic_length(self):
        """
        The Haar basis needs a power of two.
        """
        with self.assertRaises(InputError):
            experiments.thresholding_comparison(n=100)


class DetectedJumpsTest(unittest.TestCase):
    def test_tolerance(self):
        """
        A true jump counts when an estimated jump lies within the tolerance.
        """
        self.assertEqual(experiments.detected_jumps((10, 50), (12, 80), 2), 1)
        self.assertEqual(experiments.detected_jumps((10, 50), (12, 48), 2), 2)
        self.assertEqual(experiments.detected_jumps((10, 50), (), 2), 0)
        self.assertEqual(experiments.detected_jumps((), (3,), 2), 0)


class ChangepointComparisonTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.result = experiments.changepoint_comparison(
            n=200,
            jumps=3,
            sigma=0.5,
            reps=5,
            mc_reps=200,
            workers=2,
            min_jump=4.0,
            max_jump=6.0,
        )

    def test_shapes(self):
        """
        One row per replication and method.
        """
        self.assertEqual(self.result.reps, 5)
        for method in experiments.SEGMENTATION_METHODS:
            self.assertEqual(self.result.detected[method].shape, (5,))
            self.assertEqual(self.result.estimated[method].shape, (5,))
            self.assertTrue((self.result.detected[method] <= 3).all())
        self.assertEqual(self.result.tolerance, 2)
        self.assertAlmostEqual(self.result.gamma, bic_penalty(200, 0.5))

    def test_large_jumps_found(self):
        """
        Jumps of eight noise levels and more are found.
        """
        self.assertGreaterEqual(float(np.mean(self.result.detected["mcps"])), 2.5)

    def test_invalid(self):
        """
        At least one replication is needed.
        """
        with self.assertRaises(InputError):
            experiments.changepoint_comparison(n=50, reps=0)


class TenJumpComparisonTest(unittest.TestCase):
    def test_mcps_not_worse_than_potts(self):
        """
        On ten-jump signals of length 1497 with jumps of one to three noise
        levels, MCPS finds at least as many true jumps as the jump-penalized
        fit in most runs.
        """
        result = experiments.changepoint_comparison(
            n=1497, jumps=10, sigma=1.0, reps=20, mc_reps=300, workers=2
        )
        self.assertEqual(result.reps, 20)
        self.assertGreaterEqual(result.mcps_not_worse, 0.6)


class CoverageTest(unittest.TestCase):
    def test_step_truth(self):
        """
        Alternating levels on nearly equal segments.
        """
        assert_array_equal(experiments.step_truth(6, 2, 3.0), [0, 0, 3, 3, 0, 0])
        with self.assertRaises(InputError):
            experiments.step_truth(4, 4, 1.0)

    def test_jump_count_guarantee(self):
        """
        MCPS rarely overestimates the number of jumps.
        """
        report = experiments.mcps_coverage(reps=200, mc_reps=500, workers=2)
        self.assertEqual(report.reps, 200)
        self.assertAlmostEqual(report.nominal, 0.9)
        self.assertGreaterEqual(report.coverage, 0.88)
