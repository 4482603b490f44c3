import itertools
import unittest

import numpy as np
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from mindkit import changepoint
from mindkit.changepoint import Segmentation
from mindkit.dictionaries import IntervalSystem
from mindkit.exceptions import InfeasibleError
from mindkit.exceptions import InputError
from mindkit.exceptions import UnsupportedError
from mindkit.multiscale import segmentation_statistic


def _sse(y, segmentation):
    r = y - segmentation.fit()
    return float(np.dot(r, r))


class SegmentationTest(unittest.TestCase):
    def test_fit_and_segments(self):
        """
        Breakpoints are one-based ends of the left segments.
        """
        seg = Segmentation(5, (2, 4), np.array([1.0, 2.0, 3.0]))
        assert_array_equal(seg.fit(), [1, 1, 2, 2, 3])
        self.assertEqual(seg.segments(), [(0, 2), (2, 4), (4, 5)])
        self.assertEqual(seg.jumps, 2)
        self.assertIsNone(seg.boxes)

    def test_invalid(self):
        """
        Breakpoints must be sorted inside [1, n - 1] with one level each.
        """
        with self.assertRaises(InputError):
            Segmentation(5, (0,), np.zeros(2))
        with self.assertRaises(InputError):
            Segmentation(5, (5,), np.zeros(2))
        with self.assertRaises(InputError):
            Segmentation(5, (3, 2), np.zeros(3))
        with self.assertRaises(InputError):
            Segmentation(5, (2,), np.zeros(3))
        with self.assertRaises(InputError):
            Segmentation(5, (2,), np.zeros(2), np.zeros((3, 2)))


class FeasibleBoxTest(unittest.TestCase):
    def test_constant_segment(self):
        """
        For zero data the full-length interval gives the tightest bound.
        """
        system = changepoint.default_system(4, "all")
        box = changepoint.segment_feasible_box(np.zeros(4), 1, 4, system, 1.0)
        assert_allclose(box, (-0.5, 0.5))

    def test_empty_box(self):
        """
        A segment across a large jump has no admissible level.
        """
        system = IntervalSystem.build(4, "all")
        y = np.array([0.0, 0.0, 10.0, 10.0])
        self.assertIsNone(changepoint.segment_feasible_box(y, 1, 4, system, 1.0))
        self.assertIsNotNone(changepoint.segment_feasible_box(y, 3, 4, system, 1.0))

    def test_box_empty_within_tolerance(self):
        """
        A box inverted by less than the tolerance collapses to its midpoint,
        and the fitted level sits inside it.
        """
        system = IntervalSystem.from_pairs(2, [(1, 1), (2, 2)])
        y = np.array([0.0, 2.0 + 1e-13])
        box = changepoint.segment_feasible_box(y, 1, 2, system, 1.0)
        self.assertEqual(box[0], box[1])
        self.assertAlmostEqual(box[0], 1.0, places=12)
        for seg in (
            changepoint.mcps_solve(y, system, 1.0),
            changepoint.brute_force_mcps(y, system, 1.0),
        ):
            self.assertEqual(seg.jumps, 0)
            self.assertLessEqual(seg.boxes[0, 0], seg.levels[0])
            self.assertLessEqual(seg.levels[0], seg.boxes[0, 1])

    def test_invalid_segment(self):
        """
        Segments outside [1, n] are rejected.
        """
        system = IntervalSystem.build(4, "all")
        with self.assertRaises(InputError):
            changepoint.segment_feasible_box(np.zeros(4), 3, 2, system, 1.0)


class McpsTest(unittest.TestCase):
    def test_matches_brute_force(self):
        """
        The dynamic program finds the fewest jumps and, among those, the
        smallest residual sum of squares.
        """
        rng = np.random.default_rng(0)
        for trial in range(40):
            n = int(rng.integers(3, 11))
            signal, _ = changepoint.random_step_signal(n, 2, int(rng.integers(1000)))
            y = signal + 0.5 * rng.standard_normal(n)
            system = changepoint.default_system(n, "all")
            q = float(rng.uniform(0.3, 2.0))
            fast = changepoint.mcps_solve(y, system, q)
            slow = changepoint.brute_force_mcps(y, system, q)
            self.assertEqual(fast.jumps, slow.jumps, trial)
            self.assertAlmostEqual(_sse(y, fast), _sse(y, slow), places=9)

    def test_constant_signal(self):
        """
        A noise-free constant signal has no jumps.
        """
        seg = changepoint.mcps_solve(
            np.full(32, 1.5), changepoint.default_system(32), 1.0
        )
        self.assertEqual(seg.jumps, 0)
        assert_allclose(seg.levels, [1.5])

    def test_constraint_holds(self):
        """
        Levels lie in their boxes and the residual passes every interval
        inside a segment.
        """
        rng = np.random.default_rng(1)
        signal, _ = changepoint.random_step_signal(60, 4, 3, min_gap=8)
        y = signal + rng.standard_normal(60)
        system = changepoint.default_system(60)
        seg = changepoint.mcps_solve(y, system, 1.0)
        self.assertEqual(seg.boxes.shape, (seg.jumps + 1, 2))
        self.assertTrue((seg.levels >= seg.boxes[:, 0] - 1e-9).all())
        self.assertTrue((seg.levels <= seg.boxes[:, 1] + 1e-9).all())
        self.assertLessEqual(segmentation_statistic(y, seg, system), 1.0 + 1e-9)

    def test_large_jump(self):
        """
        A jump of ten noise levels is found at its position.
        """
        y = np.repeat([0.0, 10.0], 32)
        seg = changepoint.mcps(y, 1.0, 0.1, reps=200, seed=4)
        self.assertEqual(seg.breakpoints, (32,))
        assert_allclose(seg.levels, [0.0, 10.0])

    def test_infeasible(self):
        """
        A threshold below every scale penalty leaves no segmentation.
        """
        system = changepoint.default_system(8, "all")
        with self.assertRaises(InfeasibleError):
            changepoint.mcps_solve(np.zeros(8), system, -5.0)
        with self.assertRaises(InfeasibleError):
            changepoint.brute_force_mcps(np.zeros(8), system, -5.0)

    def test_brute_force_limit(self):
        """
        Exhaustive search refuses long signals.
        """
        system = changepoint.default_system(15, "all")
        with self.assertRaises(UnsupportedError):
            changepoint.brute_force_mcps(np.zeros(15), system, 1.0)

    def test_length_mismatch(self):
        """
        The data must match the interval system.
        """
        with self.assertRaises(InputError):
            changepoint.mcps_solve(np.zeros(5), changepoint.default_system(6), 1.0)


class PottsTest(unittest.TestCase):
    def test_matches_enumeration(self):
        """
        The dynamic program minimizes the Potts functional exactly.
        """
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            y = rng.standard_normal(n) * 2
            gamma = float(rng.uniform(0.1, 3.0))
            best = np.inf
            for m in range(n):
                for cut in itertools.combinations(range(1, n), m):
                    edges = (0,) + cut + (n,)
                    levels = [y[a:b].mean() for a, b in zip(edges[:-1], edges[1:])]
                    seg = Segmentation(n, cut, np.array(levels))
                    best = min(best, changepoint.potts_objective(y, seg, gamma))
            found = changepoint.jump_penalized_ls(y, gamma)
            self.assertAlmostEqual(
                changepoint.potts_objective(y, found, gamma), best, places=10
            )

    def test_extremes(self):
        """
        gamma = 0 keeps every sample; a huge gamma fits the mean.
        """
        y = np.array([1.0, 3.0, 2.0])
        assert_array_equal(changepoint.jump_penalized_ls(y, 0.0).fit(), y)
        flat = changepoint.jump_penalized_ls(y, 1e6)
        self.assertEqual(flat.jumps, 0)
        assert_allclose(flat.levels, [2.0])
        with self.assertRaises(InputError):
            changepoint.jump_penalized_ls(y, -1.0)

    def test_bic_penalty(self):
        """
        2 sigma^2 log2 n.
        """
        self.assertEqual(changepoint.bic_penalty(1024, 1.0), 20.0)
        self.assertEqual(changepoint.bic_penalty(8, 2.0), 24.0)


class StepSignalTest(unittest.TestCase):
    def test_shape(self):
        """
        Breakpoints keep their minimum gap and jumps stay in range.
        """
        for seed in range(20):
            signal, breakpoints = changepoint.random_step_signal(
                100, 6, seed, min_gap=10
            )
            self.assertEqual(len(breakpoints), 6)
            edges = np.diff((0,) + breakpoints + (100,))
            self.assertTrue((edges >= 10).all())
            jumps = np.abs(np.diff(signal))
            assert_array_equal(np.nonzero(jumps)[0] + 1, breakpoints)
            self.assertTrue(((jumps[jumps > 0] >= 1) & (jumps[jumps > 0] <= 3)).all())

    def test_reproducible(self):
        """
        The same seed gives the same signal.
        """
        a = changepoint.random_step_signal(50, 3, 7)
        b = changepoint.random_step_signal(50, 3, 7)
        assert_array_equal(a[0], b[0])
        self.assertEqual(a[1], b[1])

    def test_too_many_jumps(self):
        """
        Jumps that cannot fit are rejected.
        """
        with self.assertRaises(InputError):
            changepoint.random_step_signal(10, 5, 0, min_gap=2)
