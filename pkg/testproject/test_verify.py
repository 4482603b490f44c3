import math
import unittest

from mindkit import verify
from mindkit.exceptions import InputError
from mindkit.verify import SuiteResult


class SuiteResultTest(unittest.TestCase):
    def test_record_keeps_worst(self):
        """
        Each quantity keeps its largest measured value.
        """
        result = SuiteResult("demo", 3)
        result.record("gap", 1e-12, 1e-9)
        result.record("gap", 1e-10, 1e-9)
        self.assertEqual(result.measured["gap"], 1e-10)
        self.assertTrue(result.passed)
        result.record("slack", 0.1, 1e-6)
        self.assertFalse(result.passed)
        self.assertEqual(result.failures, ["slack"])

    def test_empty(self):
        """
        A suite without measurements passes.
        """
        self.assertTrue(SuiteResult("empty", 0).passed)


class SuitesTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.results = verify.run_suite("all", instances=2, seed=1)

    def test_every_suite_runs(self):
        """
        ``all`` runs each registered suite once.
        """
        self.assertEqual([r.name for r in self.results], list(verify.SUITES))
        for result in self.results:
            self.assertEqual(result.instances, 2)

    def test_every_suite_passes(self):
        """
        All equivalences hold on random instances.
        """
        for result in self.results:
            with self.subTest(suite=result.name):
                self.assertTrue(result.passed, result.failures)
                for value in result.measured.values():
                    self.assertFalse(math.isnan(value))

    def test_single_suite(self):
        """
        A suite can be run alone with its own seed.
        """
        (result,) = verify.run_suite("block", instances=3, seed=5)
        self.assertEqual(result.name, "block")
        self.assertTrue(result.passed, result.failures)

    def test_soft_suite_solves_every_instance(self):
        """
        The primal-dual solver matches soft thresholding on every instance
        to 1e-6.
        """
        result = verify.soft_suite(instances=20, seed=2)
        self.assertEqual(result.instances, 20)
        self.assertEqual(result.limits["solver_error"], 1e-6)
        self.assertTrue(result.passed, result.failures)

    def test_aliases(self):
        """
        Alternate names resolve to the registered suites.
        """
        for name in verify.SUITE_ALIASES.values():
            self.assertIn(name, verify.SUITES)
        (result,) = verify.run_suite("thm3.3", instances=2, seed=1)
        self.assertEqual(result.name, "block")

    def test_unknown_suite(self):
        """
        Unknown suite names are rejected.
        """
        with self.assertRaises(InputError):
            verify.run_suite("everything")
