"""
Numerical checks of the equivalences between thresholding, penalized and
multiscale constrained estimators, run on random instances.

Each suite returns a :class:`SuiteResult` holding the worst value of every
measured quantity and the limit it is held to.
"""
import logging
import math
from dataclasses import dataclass
from dataclasses import field
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional

import numpy as np

from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import CanonicalBasis
from mindkit.dictionaries import HaarBasis
from mindkit.dictionaries import basis_probes
from mindkit.dictionaries import block_probes
from mindkit.dictionaries import identity_probe
from mindkit.exceptions import InputError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.multiscale import MultiscaleConstraint
from mindkit.multiscale import universal_threshold
from mindkit.solvers import MindProblem
from mindkit.solvers import Regularizer
from mindkit.solvers import conjugate_block_l1
from mindkit.solvers import discrepancy_calibrate
from mindkit.solvers import dual_group_lasso_solve
from mindkit.solvers import fidelity_constrained_solve
from mindkit.solvers import group_lasso_solve
from mindkit.solvers import pdhg_solve
from mindkit.solvers import penalized_solve
from mindkit.solvers import verify_dual_equivalence
from mindkit.thresholding import GARROTE
from mindkit.thresholding import ShrinkageRule
from mindkit.thresholding import Theta
from mindkit.thresholding import block_garrote_weights
from mindkit.thresholding import block_shrink
from mindkit.thresholding import block_threshold
from mindkit.thresholding import eta_theta
from mindkit.thresholding import garrote_weights
from mindkit.thresholding import hard_weights
from mindkit.thresholding import verify_block_characterization
from mindkit.thresholding import verify_characterization
from mindkit.thresholding import wavelet_threshold
from mindkit.thresholding import weighted_soft


logger = logging.getLogger(__name__)


@dataclass
class SuiteResult:
    name: str
    instances: int
    measured: Dict[str, float] = field(default_factory=dict)
    limits: Dict[str, float] = field(default_factory=dict)

    def record(self, key: str, value: float, limit: float):
        self.measured[key] = max(self.measured.get(key, -math.inf), float(value))
        self.limits[key] = limit

    @property
    def passed(self) -> bool:
        return all(self.measured[k] <= self.limits[k] for k in self.measured)

    @property
    def failures(self) -> List[str]:
        return sorted(k for k in self.measured if self.measured[k] > self.limits[k])


def _rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _sparse_haar_data(rng: np.random.Generator, basis: HaarBasis, sigma: float):
    coeffs = np.where(rng.random(basis.n) < 0.2, rng.normal(0.0, 4.0, basis.n), 0.0)
    return basis.synthesize(coeffs) + sigma * rng.standard_normal(basis.n)


def soft_suite(
    instances: int = 200, seed: int = 0, solver_instances: Optional[int] = None
):
    """
    Soft thresholding solves the coefficient-wise constrained program, and
    the primal-dual solver reproduces it on the first ``solver_instances``
    instances, all of them by default.
    """
    if solver_instances is None:
        solver_instances = instances
    result = SuiteResult("soft", instances)
    n, sigma = 64, 1.0
    basis = HaarBasis.for_length(n)
    base = universal_threshold(n, sigma)
    for i in range(instances):
        rng = _rng(seed, i)
        y = _sparse_haar_data(rng, basis, sigma)
        q = base * rng.uniform(0.5, 1.5, n)
        estimate = wavelet_threshold(y, basis, ShrinkageRule.soft(q))
        report = verify_characterization(estimate, y, basis, q)
        result.record("gap", report.gap, 1e-9)
        result.record("violation", max(0.0, -report.margin), 1e-9)
        if i < solver_instances:
            problem = MindProblem(
                DesignOperator.identity(n),
                Observation(y, sigma),
                MultiscaleConstraint(basis_probes(basis, q), 1.0),
                Regularizer.l1_coeff(basis),
            )
            solved = pdhg_solve(problem)
            result.record(
                "solver_error", np.abs(solved.beta_hat - estimate).max(), 1e-6
            )
    return result


def garrote_suite(instances: int = 10, seed: int = 0):
    """
    Garrote and hard thresholding equal soft thresholding with
    data-dependent weights, and the garrote passes the weighted
    characterization.
    """
    result = SuiteResult("garrote", instances)
    basis = HaarBasis.for_length(64)
    for i in range(instances):
        rng = _rng(seed, i)
        c = rng.normal(0.0, 3.0, 10000)
        q = rng.uniform(0.5, 3.0, c.size)
        result.record(
            "garrote_identity",
            np.abs(eta_theta(c, q, GARROTE) - weighted_soft(c, garrote_weights(c, q)))
            .max(),
            1e-12,
        )
        result.record(
            "hard_identity",
            np.abs(eta_theta(c, q, Theta.HARD) - weighted_soft(c, hard_weights(c, q)))
            .max(),
            1e-12,
        )
        y = _sparse_haar_data(rng, basis, 1.0)
        qb = universal_threshold(basis.n, 1.0)
        estimate = wavelet_threshold(y, basis, ShrinkageRule.garrote(qb))
        weights = garrote_weights(basis.analyze(y), qb)
        report = verify_characterization(estimate, y, basis, weights)
        result.record("gap", report.gap, 1e-9)
        result.record("violation", max(0.0, -report.margin), 1e-9)
    return result


def block_suite(instances: int = 50, seed: int = 0):
    """
    Block soft thresholding passes the block characterization; block
    garrote equals block soft with block garrote weights.
    """
    result = SuiteResult("block", instances)
    basis = HaarBasis.for_length(64)
    partition = BlockPartition.contiguous(64, 8)
    for i in range(instances):
        rng = _rng(seed, i)
        y = _sparse_haar_data(rng, basis, 1.0)
        q = rng.uniform(1.0, 6.0, len(partition.blocks))
        estimate = block_threshold(y, basis, partition, q)
        report = verify_block_characterization(estimate, y, basis, partition, q)
        result.record("gap", report.gap, 1e-9)
        result.record("violation", max(0.0, -report.margin), 1e-9)
        c = basis.analyze(y)
        garrote = block_shrink(c, partition, q, GARROTE)
        reweighted = block_shrink(c, partition, block_garrote_weights(c, partition, q))
        result.record("garrote_identity", np.abs(garrote - reweighted).max(), 1e-12)
    return result


def block_lasso_suite(instances: int = 50, seed: int = 0):
    """
    With ``X = I`` and disjoint blocks, block soft thresholding, the group
    lasso and the constrained minimum-norm program give the same estimate.
    """
    result = SuiteResult("block-lasso", instances)
    n = 64
    partition = BlockPartition.contiguous(n, 8)
    canonical = CanonicalBasis(n)
    for i in range(instances):
        rng = _rng(seed, i)
        y = rng.normal(0.0, 2.0, n) * (rng.random(n) < 0.5)
        w = rng.uniform(0.5, 2.0, len(partition.blocks))
        gamma = rng.uniform(0.5, 3.0)
        threshold = block_threshold(y, canonical, partition, gamma * w)
        lasso = group_lasso_solve(np.eye(n), y, partition, w, gamma)
        problem = MindProblem(
            DesignOperator.identity(n),
            Observation(y, 0.0),
            MultiscaleConstraint(block_probes(canonical, partition, w), gamma),
            Regularizer.l2_sq(),
        )
        constrained = pdhg_solve(problem).beta_hat
        result.record("threshold_vs_lasso", np.linalg.norm(threshold - lasso), 1e-5)
        result.record(
            "threshold_vs_constrained", np.linalg.norm(threshold - constrained), 1e-5
        )
        result.record(
            "lasso_vs_constrained", np.linalg.norm(lasso - constrained), 1e-5
        )
    return result


def lasso_dual_suite(instances: int = 50, seed: int = 0):
    """
    The lasso and the minimum-prediction-norm program under the correlation
    constraint have the same predictions, and the lasso solution is feasible
    for the constrained program.
    """
    result = SuiteResult("lasso-dual", instances)
    n, p = 20, 8
    singletons = BlockPartition.singletons(p)
    pairs = BlockPartition.contiguous(p, 2)
    for i in range(instances):
        rng = _rng(seed, i)
        X = rng.standard_normal((n, p))
        beta = np.where(rng.random(p) < 0.4, rng.normal(0.0, 3.0, p), 0.0)
        y = X @ beta + rng.standard_normal(n)
        partition = singletons if i % 2 == 0 else pairs
        gamma = 0.3 * float(np.abs(X.T @ y).max())
        report = verify_dual_equivalence(X, y, partition, 1.0, gamma)
        result.record("prediction_gap", report.prediction_gap, 1e-5)
        result.record("kkt_excess", report.constraint_slack / gamma, 1e-6)
    return result


def discrepancy_suite(instances: int = 20, seed: int = 0):
    """
    Round trip penalized to residual-constrained: the constrained solution
    at the penalized residual has the same regularizer value, and the
    discrepancy principle recovers the multiplier of ridge shrinkage in
    closed form.
    """
    result = SuiteResult("discrepancy", instances)
    n = 32
    op = DesignOperator.identity(n)
    for i in range(instances):
        rng = _rng(seed, i)
        steps = np.repeat(rng.normal(0.0, 2.0, 4), n // 4)
        y = steps + 0.5 * rng.standard_normal(n)
        obs = Observation(y, 0.5)

        q = rng.uniform(0.2, 0.8) * float(np.linalg.norm(y))
        ridge = discrepancy_calibrate(op, obs, Regularizer.l2_sq(), q)
        expected = q / (float(np.linalg.norm(y)) - q)
        result.record("ridge_gamma", _relative(ridge.gamma, expected), 1e-6)

        for reg in (Regularizer.l2_sq(), Regularizer.tv()):
            gamma = rng.uniform(0.2, 2.0)
            penalized = penalized_solve(op, y, reg, gamma)
            residual = float(np.linalg.norm(y - penalized))
            problem = MindProblem(
                op, obs, MultiscaleConstraint(identity_probe(n), residual), reg
            )
            constrained = pdhg_solve(problem).beta_hat
            result.record(
                "{0}_objective".format(reg.kind.value),
                _relative(reg(penalized), reg(constrained)),
                1e-4,
            )
    return result


def fidelity_constrained_suite(instances: int = 20, seed: int = 0):
    """
    Round trip penalized to regularizer-constrained: constraining ``R`` at
    the value of the penalized solution gives the same fidelity.
    """
    result = SuiteResult("fidelity-constrained", instances)
    n = 32
    op = DesignOperator.identity(n)
    for i in range(instances):
        rng = _rng(seed, i)
        y = np.repeat(rng.normal(0.0, 2.0, 4), n // 4) + 0.5 * rng.standard_normal(n)
        for reg in (Regularizer.l2_sq(), Regularizer.tv()):
            gamma = rng.uniform(0.2, 2.0)
            penalized = penalized_solve(op, y, reg, gamma)
            constrained = fidelity_constrained_solve(op, y, reg, reg(penalized))
            fit = 0.5 * float(np.sum((y - penalized) ** 2))
            result.record(
                "{0}_fidelity".format(reg.kind.value),
                _relative(fit, constrained.objective),
                1e-4,
            )
    return result


def fenchel_suite(instances: int = 20, seed: int = 0):
    """
    For a block l1 regularizer, the penalized least-squares minimizer makes
    the conjugate of the regularizer vanish at ``X^T (Y - X beta)`` and
    matches the prediction norm of the dual program.
    """
    result = SuiteResult("fenchel", instances)
    n, p = 20, 8
    partition = BlockPartition.contiguous(p, 2)
    for i in range(instances):
        rng = _rng(seed, i)
        X = rng.standard_normal((n, p))
        y = X @ rng.normal(0.0, 2.0, p) + rng.standard_normal(n)
        w = 0.3 * float(np.abs(X.T @ y).max()) * rng.uniform(0.5, 2.0, p // 2)
        reg = Regularizer.block_l1(partition, w)
        penalized = penalized_solve(DesignOperator.dense(X), y, reg, 1.0)
        dual = dual_group_lasso_solve(X, y, partition, w, 1.0)
        correlation = X.T @ (y - X @ penalized)
        outside = conjugate_block_l1(correlation, partition, w * (1.0 + 1e-6))
        result.record("conjugate", 0.0 if outside == 0.0 else 1.0, 0.0)
        prediction = 0.5 * float(np.sum((X @ penalized) ** 2))
        result.record("objective", _relative(prediction, dual.objective), 1e-4)
        result.record(
            "prediction_gap", np.linalg.norm(X @ (penalized - dual.beta_hat)), 1e-5
        )
    return result


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "soft": soft_suite,
    "garrote": garrote_suite,
    "block": block_suite,
    "block-lasso": block_lasso_suite,
    "lasso-dual": lasso_dual_suite,
    "discrepancy": discrepancy_suite,
    "fidelity-constrained": fidelity_constrained_suite,
    "fenchel": fenchel_suite,
}

# Alternate suite names.
SUITE_ALIASES: Dict[str, str] = {
    "thm3.1": "soft",
    "thm3.2": "garrote",
    "thm3.3": "block",
    "cor4.3": "block-lasso",
    "thm4.1": "lasso-dual",
    "thmA.2": "discrepancy",
    "thmA.3": "fidelity-constrained",
    "thmB.3": "fenchel",
}


def run_suite(
    name: str, instances: Optional[int] = None, seed: int = 0
) -> List[SuiteResult]:
    """
    Runs one suite by name, or every suite for ``"all"``.

    :param str name: A key of ``SUITES`` or ``SUITE_ALIASES``, or ``"all"``.
    :param int instances: Overrides each suite's default instance count.
    :param int seed: Base seed; instance ``i`` draws from ``(seed, i)``.
    :rtype: list
    """
    name = SUITE_ALIASES.get(name, name)
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise InputError(
            "Unknown suite {0!r}; choose from {1}, all.".format(
                name, ", ".join(SUITES)
            )
        )
    results = []
    for key in names:
        kwargs = {"seed": seed}
        if instances is not None:
            kwargs["instances"] = instances
        result = SUITES[key](**kwargs)
        if result.passed:
            logger.info("%s: passed on %d instances", key, result.instances)
        else:
            logger.warning("%s: failed (%s)", key, ", ".join(result.failures))
        results.append(result)
    return results
