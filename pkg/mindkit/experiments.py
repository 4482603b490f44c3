"""
Desk-scale simulation studies: wavelet thresholding rules side by side,
jump-penalized least squares against multiscale segmentation, and the
jump-count guarantee of multiscale segmentation.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np

from mindkit.changepoint import bic_penalty
from mindkit.changepoint import default_system
from mindkit.changepoint import jump_penalized_ls
from mindkit.changepoint import mcps_solve
from mindkit.changepoint import random_step_signal
from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import HaarBasis
from mindkit.dictionaries import interval_probes
from mindkit.exceptions import InputError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.model import noise
from mindkit.model import simulate
from mindkit.multiscale import GuaranteeReport
from mindkit.multiscale import block_universal_thresholds
from mindkit.multiscale import gumbel_threshold
from mindkit.multiscale import monte_carlo_quantile
from mindkit.multiscale import simulate_guarantee
from mindkit.multiscale import universal_threshold
from mindkit.signals import make_signal
from mindkit.solvers import Regularizer
from mindkit.thresholding import ShrinkageRule
from mindkit.thresholding import block_threshold
from mindkit.thresholding import wavelet_threshold


logger = logging.getLogger(__name__)

THRESHOLDING_METHODS = ("soft", "hard", "garrote", "block-soft")
SEGMENTATION_METHODS = ("potts", "mcps")


@dataclass(frozen=True)
class MethodMetrics:
    """
    ``mse`` and ``max_error`` compare the estimate with the truth.
    ``large_mse`` is the mean squared coefficient error over coefficients
    whose data value exceeds twice the threshold. ``kept`` counts nonzero
    estimated coefficients.
    """

    mse: float
    max_error: float
    large_mse: float
    kept: int


@dataclass(frozen=True, eq=False)
class ThresholdingComparison:
    n: int
    sigma: float
    q: float
    truth: np.ndarray
    observation: np.ndarray
    estimates: Dict[str, np.ndarray]
    metrics: Dict[str, MethodMetrics]
    hard_exact: bool


def thresholding_comparison(
    n: int = 1024,
    sigma: float = 0.1,
    seed: int = 0,
    signal: str = "piecewise-smooth",
    alpha: Optional[float] = None,
) -> ThresholdingComparison:
    """
    Denoises one noisy copy of a test signal in the Haar basis with soft,
    hard, garrote and block soft thresholding.

    The coefficient threshold is the universal threshold, or the Gumbel
    threshold at level ``alpha`` when one is given. Block soft uses
    level-wise blocks of about ``log n`` coefficients with
    ``block_universal_thresholds``.

    :rtype: ThresholdingComparison
    """
    basis = HaarBasis.for_length(n)
    truth = make_signal(signal, n, seed)
    obs = simulate(DesignOperator.identity(n), truth, sigma, seed)
    if alpha is None:
        q = universal_threshold(n, sigma)
    else:
        q = gumbel_threshold(n, sigma, alpha)
    partition = BlockPartition.haar_levels(basis)
    block_q = block_universal_thresholds(partition.sizes, sigma)
    estimates = {
        "soft": wavelet_threshold(obs, basis, ShrinkageRule.soft(q)),
        "hard": wavelet_threshold(obs, basis, ShrinkageRule.hard(q)),
        "garrote": wavelet_threshold(obs, basis, ShrinkageRule.garrote(q)),
        "block-soft": block_threshold(obs, basis, partition, block_q),
    }

    data = basis.analyze(obs.y)
    target = basis.analyze(truth)
    large = np.abs(data) > 2.0 * q
    metrics = {}
    for name, estimate in estimates.items():
        coeffs = basis.analyze(estimate)
        error = estimate - truth
        metrics[name] = MethodMetrics(
            float(np.mean(error * error)),
            float(np.abs(error).max()),
            float(np.mean((coeffs - target)[large] ** 2)) if large.any() else 0.0,
            int(np.count_nonzero(np.abs(coeffs) > 1e-12)),
        )
        logger.info(
            "%s thresholding: mse=%.6g, %d coefficients kept",
            name,
            metrics[name].mse,
            metrics[name].kept,
        )
    above = np.abs(data) > q
    hard_coeffs = basis.analyze(estimates["hard"])
    hard_exact = bool(np.allclose(hard_coeffs[above], data[above], atol=1e-10))
    return ThresholdingComparison(
        n, sigma, q, truth, obs.y, estimates, metrics, hard_exact
    )


def detected_jumps(
    truth: Sequence[int], found: Sequence[int], tolerance: int
) -> int:
    """
    Number of true breakpoints with an estimated breakpoint at most
    ``tolerance`` positions away.
    """
    if not truth or not found:
        return 0
    found = np.asarray(found)
    return int(
        sum(np.abs(found - t).min() <= tolerance for t in np.asarray(truth))
    )


@dataclass(frozen=True, eq=False)
class ChangepointComparison:
    """
    Per-replication arrays, keyed by method: ``detected`` counts true jumps
    found within ``tolerance``; ``estimated`` is the number of jumps fitted.
    """

    n: int
    jumps: int
    sigma: float
    alpha: float
    q: float
    gamma: float
    tolerance: int
    detected: Dict[str, np.ndarray]
    estimated: Dict[str, np.ndarray]

    @property
    def reps(self) -> int:
        return int(self.detected["mcps"].size)

    @property
    def mcps_not_worse(self) -> float:
        """
        Fraction of replications where MCPS detects at least as many true
        jumps as the jump-penalized fit.
        """
        return float(np.mean(self.detected["mcps"] >= self.detected["potts"]))


def changepoint_comparison(
    n: int = 1497,
    jumps: int = 10,
    sigma: float = 1.0,
    alpha: float = 0.1,
    reps: int = 200,
    seed: int = 0,
    tolerance: Optional[int] = None,
    mc_reps: Optional[int] = None,
    workers: int = 1,
    min_jump: float = 1.0,
    max_jump: float = 3.0,
) -> ChangepointComparison:
    """
    Segments random ``jumps``-jump signals with the Potts functional at the
    penalty ``2 sigma^2 log2 n`` and with MCPS at level ``alpha``.

    The MCPS threshold is calibrated once. Replication ``i`` draws the signal
    from seed ``seed + i`` and the noise from seed ``seed + reps + i``.

    :param int tolerance: Location tolerance for a detected jump, defaults
        to ``max(1, n // 100)``.
    :rtype: ChangepointComparison
    """
    if reps < 1:
        raise InputError("reps must be at least 1.")
    if tolerance is None:
        tolerance = max(1, n // 100)
    system = default_system(n)
    calibration_seed = seed + 2 * reps
    q = monte_carlo_quantile(
        interval_probes(system), n, sigma, alpha, mc_reps, calibration_seed, workers
    ).q_alpha
    gamma = bic_penalty(n, sigma)
    min_gap = max(1, n // (4 * (jumps + 1)))

    def replicate(i: int) -> Tuple[int, int, int, int]:
        signal, truth = random_step_signal(
            n, jumps, seed + i, min_jump, max_jump, min_gap
        )
        y = signal + noise(n, sigma, seed + reps + i)
        potts = jump_penalized_ls(y, gamma)
        multiscale = mcps_solve(y, system, q)
        return (
            detected_jumps(truth, potts.breakpoints, tolerance),
            detected_jumps(truth, multiscale.breakpoints, tolerance),
            potts.jumps,
            multiscale.jumps,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows: List[Tuple[int, int, int, int]] = list(
                pool.map(replicate, range(reps))
            )
    else:
        rows = [replicate(i) for i in range(reps)]
    table = np.array(rows, dtype=np.intp).reshape(-1, 4)
    result = ChangepointComparison(
        n,
        jumps,
        sigma,
        alpha,
        q,
        gamma,
        tolerance,
        {"potts": table[:, 0], "mcps": table[:, 1]},
        {"potts": table[:, 2], "mcps": table[:, 3]},
    )
    logger.info(
        "MCPS detects at least as many jumps as Potts in %.1f%% of %d runs",
        100.0 * result.mcps_not_worse,
        reps,
    )
    return result


def step_truth(n: int, jumps: int, jump_size: float) -> np.ndarray:
    """
    Alternating levels ``0, jump_size, 0, ...`` on ``jumps + 1`` segments of
    nearly equal length.
    """
    if jumps < 0 or jumps >= n:
        raise InputError("Cannot place {0} jumps in {1} samples.".format(jumps, n))
    edges = np.linspace(0, n, jumps + 2).round().astype(np.intp)
    levels = jump_size * (np.arange(jumps + 1) % 2)
    return np.repeat(levels, np.diff(edges))


def mcps_coverage(
    n: int = 128,
    jumps: int = 2,
    jump_size: float = 3.0,
    sigma: float = 1.0,
    alpha: float = 0.1,
    reps: int = 1000,
    seed: int = 0,
    mc_reps: Optional[int] = None,
    workers: int = 1,
) -> GuaranteeReport:
    """
    Frequency with which MCPS fits no more jumps than the truth has.

    The guarantee asks for at least ``1 - alpha``.
    """
    system = default_system(n)
    q = monte_carlo_quantile(
        interval_probes(system), n, sigma, alpha, mc_reps, seed + reps, workers
    ).q_alpha
    truth = step_truth(n, jumps, jump_size)

    def estimator(obs: Observation) -> np.ndarray:
        return mcps_solve(obs.y, system, q).fit()

    return simulate_guarantee(
        estimator,
        DesignOperator.identity(n),
        truth,
        sigma,
        Regularizer.jump_count(),
        alpha,
        reps,
        seed,
        workers,
    )
