"""
The multiscale statistic, its calibration, and constraint checks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Callable
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from mindkit import settings
from mindkit.dictionaries import IntervalSystem
from mindkit.dictionaries import ProbeKind
from mindkit.dictionaries import ProbeSystem
from mindkit.exceptions import InputError
from mindkit.exceptions import UnsupportedError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.model import noise
from mindkit.model import simulate


if TYPE_CHECKING:
    from mindkit.changepoint import Segmentation


logger = logging.getLogger(__name__)

# Consistency constant of the median absolute deviation for Gaussian noise.
MAD_SCALE = 1.4826


@dataclass(frozen=True)
class MultiscaleConstraint:
    """
    The constraint ``max_a ||T_a(Y - X beta)|| / w_a - s_a <= q``.
    """

    probes: ProbeSystem
    q: float

    def __post_init__(self):
        if not math.isfinite(self.q):
            raise InputError("Threshold q must be finite.")

    @property
    def radii(self) -> np.ndarray:
        return self.probes.radii(self.q)


@dataclass(frozen=True)
class QuantileEstimate:
    alpha: float
    q_alpha: float
    reps: int
    stderr: float
    seed: int = 0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.reps < 1:
            raise InputError("reps must be at least 1.")


@dataclass(frozen=True)
class GuaranteeReport:
    """
    Fraction of replications with ``R(beta_hat) <= R(beta)``.
    """

    coverage: float
    nominal: float
    reps: int
    stderr: float


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1), got {0}.".format(alpha))


def multiscale_statistic(residual, probes: ProbeSystem):
    """
    Computes ``T = max_a { ||T_a r|| / w_a - s_a }``.

    :param residual: Residual vector, or a batch with the vector on the last
        axis.
    :param ProbeSystem probes: The probe family.
    :returns: A float, or an array over the batch axes.
    """
    if len(probes) == 0:
        raise InputError("Probe system is empty.")
    value = probes.statistic(residual)
    return float(value) if np.ndim(value) == 0 else value


def _draw_statistics(
    probes: ProbeSystem, sigma: float, seeds: np.ndarray
) -> np.ndarray:
    batch = np.stack([noise(probes.n, sigma, int(s)) for s in seeds])
    return probes.statistic(batch)


def simulate_statistic(
    probes: ProbeSystem,
    sigma: float,
    reps: int,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """
    Draws ``reps`` values of the statistic on pure Gaussian noise.

    Replication ``i`` uses the generator seed ``seed + i``, so the draws do
    not depend on the chunking or on the number of workers.
    """
    if reps < 1:
        raise InputError("reps must be at least 1.")
    if sigma < 0:
        raise InputError("Noise level must be nonnegative.")
    width = max(probes.m, probes.n)
    chunk = max(1, int(settings.get("MINDKIT_MC_CHUNK_BUDGET")) // width)
    seeds = seed + np.arange(reps)
    chunks = [seeds[i : i + chunk] for i in range(0, reps, chunk)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda s: _draw_statistics(probes, sigma, s), chunks)
            )
    else:
        parts = [_draw_statistics(probes, sigma, s) for s in chunks]
    return np.concatenate(parts)


def _order_statistic(sorted_draws: np.ndarray, alpha: float) -> float:
    k = math.ceil(sorted_draws.size * (1.0 - alpha))
    return float(sorted_draws[min(max(k, 1), sorted_draws.size) - 1])


def monte_carlo_quantile(
    probes: ProbeSystem,
    n: int,
    sigma: float,
    alpha: Optional[float] = None,
    reps: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> QuantileEstimate:
    """
    Empirical ``(1 - alpha)``-quantile of the statistic under pure noise.

    The quantile is the ``ceil(reps (1 - alpha))``-th order statistic. Its
    standard error is estimated by bootstrapping the draws.

    :param ProbeSystem probes: The probe family; must act on ``R^n``.
    :param int n: Signal length.
    :param float sigma: Noise standard deviation.
    :param float alpha: Level, defaults to ``MINDKIT_ALPHA``.
    :param int reps: Replications (at least 100), defaults to ``MINDKIT_MC_REPS``.
    :param int seed: Base seed.
    :param int workers: Threads used to evaluate batches.
    :rtype: QuantileEstimate
    """
    if alpha is None:
        alpha = settings.get("MINDKIT_ALPHA")
    if reps is None:
        reps = settings.get("MINDKIT_MC_REPS")
    _check_alpha(alpha)
    if reps < 100:
        raise InputError("Monte Carlo calibration needs reps >= 100.")
    if probes.n != n:
        raise InputError("Probe system acts on R^{0}, not R^{1}.".format(probes.n, n))
    draws = np.sort(simulate_statistic(probes, sigma, reps, seed, workers))
    q = _order_statistic(draws, alpha)

    rng = np.random.default_rng([seed, reps])
    boot = np.empty(settings.get("MINDKIT_MC_BOOTSTRAP"))
    for b in range(boot.size):
        boot[b] = _order_statistic(np.sort(rng.choice(draws, reps)), alpha)
    stderr = float(boot.std(ddof=1)) if boot.size > 1 else 0.0
    logger.info(
        "Monte Carlo quantile q=%.6g (alpha=%g, reps=%d, stderr=%.3g)",
        q,
        alpha,
        reps,
        stderr,
    )
    return QuantileEstimate(alpha, q, reps, stderr, seed)


def universal_threshold(n: int, sigma: float) -> float:
    """
    ``sigma * sqrt(2 log n)``.
    """
    if n < 2:
        raise InputError("Universal threshold needs n >= 2.")
    return sigma * math.sqrt(2.0 * math.log(n))


def block_universal_thresholds(sizes, sigma: float) -> np.ndarray:
    """
    Per-block thresholds ``sigma (sqrt(n_a) + sqrt(2 log K))`` for ``K``
    blocks of sizes ``n_a``. The norm of a Gaussian block exceeds
    ``sigma (sqrt(n_a) + t)`` with probability at most ``exp(-t^2 / 2)``,
    so this is the block analog of the universal threshold.
    """
    sizes = np.asarray(sizes, dtype=float)
    if sizes.ndim != 1 or sizes.size == 0 or (sizes < 1).any():
        raise InputError("Block sizes must be positive.")
    if sigma <= 0:
        raise InputError("Noise level must be positive.")
    spread = math.sqrt(2.0 * math.log(sizes.size)) if sizes.size > 1 else 0.0
    return sigma * (np.sqrt(sizes) + spread)


def gumbel_threshold(n: int, sigma: float, alpha: float) -> float:
    """
    Threshold from the Gumbel limit of the maximum of ``n`` absolute
    Gaussian coefficients.

    :param int n: Number of coefficients, at least 3.
    :param float sigma: Noise standard deviation.
    :param float alpha: Level in (0, 1).
    :rtype: float
    """
    if n < 3:
        raise InputError("Gumbel threshold needs n >= 3.")
    _check_alpha(alpha)
    a = math.sqrt(2.0 * math.log(n))
    x = -math.log(-math.log(1.0 - alpha))
    shift = 2.0 * x - math.log(math.log(n)) - math.log(math.pi)
    return sigma * (a + shift / (2.0 * a))


def predicted_coverage(n: int, u: float, sigma: float = 1.0) -> float:
    """
    Inverts the Gumbel limit: the asymptotic probability that the maximum of
    ``n`` absolute Gaussian coefficients stays below ``u``.
    """
    if n < 3:
        raise InputError("Gumbel limit needs n >= 3.")
    if sigma <= 0:
        raise InputError("Noise level must be positive.")
    a = math.sqrt(2.0 * math.log(n))
    x = ((u / sigma - a) * 2.0 * a + math.log(math.log(n)) + math.log(math.pi)) / 2.0
    return math.exp(-math.exp(-x))


def calibrate(
    probes: ProbeSystem,
    sigma: float,
    alpha: Optional[float] = None,
    mode: str = "mc",
    reps: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> QuantileEstimate:
    """
    Calibrates ``q`` by Monte Carlo (``mode="mc"``) or, for orthonormal basis
    probes only, by the Gumbel limit (``mode="gumbel"``).
    """
    if alpha is None:
        alpha = settings.get("MINDKIT_ALPHA")
    if mode == "mc":
        return monte_carlo_quantile(probes, probes.n, sigma, alpha, reps, seed, workers)
    if mode != "gumbel":
        raise InputError("Unknown calibration mode {0!r}.".format(mode))
    if probes.kind is not ProbeKind.BASIS or probes.penalties.any():
        raise UnsupportedError("Gumbel calibration needs unpenalized basis probes.")
    weight = float(probes.weights[0])
    if not np.allclose(probes.weights, weight):
        raise InputError("Gumbel calibration needs equal probe weights.")
    q = gumbel_threshold(probes.n, sigma, alpha) / weight
    return QuantileEstimate(alpha, q, 1, 0.0, seed)


def is_feasible(
    beta,
    obs: Observation,
    op: DesignOperator,
    constraint: MultiscaleConstraint,
    tol: Optional[float] = None,
) -> Tuple[bool, float]:
    """
    Checks the multiscale constraint at ``beta``.

    :returns: ``(feasible, slack)`` where ``slack = T(Y - X beta) - q``; the
        point is feasible when the slack does not exceed ``tol``.
    """
    if tol is None:
        tol = settings.get("MINDKIT_FEASIBILITY_TOL")
    residual = obs.y - op.apply(beta)
    slack = multiscale_statistic(residual, constraint.probes) - constraint.q
    return slack <= tol, float(slack)


def simulate_guarantee(
    estimator: Callable[[Observation], np.ndarray],
    op: DesignOperator,
    beta,
    sigma: float,
    regularizer: Callable[[np.ndarray], float],
    alpha: float,
    reps: int,
    seed: int = 0,
    workers: int = 1,
) -> GuaranteeReport:
    """
    Estimates ``P{R(beta_hat) <= R(beta)}`` by repeated simulation.

    Replication ``i`` simulates data with seed ``seed + i`` and hands the
    Observation to ``estimator``.
    """
    _check_alpha(alpha)
    if reps < 1:
        raise InputError("reps must be at least 1.")
    beta = np.asarray(beta, dtype=float)
    target = float(regularizer(beta)) + 1e-9

    def covered(i: int) -> bool:
        obs = simulate(op, beta, sigma, seed + i)
        return float(regularizer(estimator(obs))) <= target

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits: List[bool] = list(pool.map(covered, range(reps)))
    else:
        hits = [covered(i) for i in range(reps)]
    coverage = float(np.mean(hits))
    stderr = math.sqrt(coverage * (1.0 - coverage) / reps)
    logger.info(
        "Coverage %.4f over %d replications (nominal %.3f)",
        coverage,
        reps,
        1 - alpha,
    )
    return GuaranteeReport(coverage, 1.0 - alpha, reps, stderr)


def estimate_sigma(y) -> float:
    """
    Noise level from the median absolute finest-scale Haar detail
    ``(y[2k] - y[2k+1]) / sqrt(2)``. Works for any ``n >= 2``; an odd last
    sample is ignored.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise InputError("Need at least two samples to estimate sigma.")
    m = y.size // 2 * 2
    details = (y[0:m:2] - y[1:m:2]) / math.sqrt(2.0)
    return MAD_SCALE * float(np.median(np.abs(details)))


def segmentation_statistic(
    y, segmentation: "Segmentation", system: IntervalSystem
) -> float:
    """
    The interval statistic of ``y - fit`` over the intervals of ``system``
    that lie inside a single segment. Returns ``-inf`` if there is none.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (system.n,):
        raise InputError("Data length does not match the interval system.")
    labels = np.searchsorted(
        np.asarray(segmentation.breakpoints, dtype=np.intp),
        np.arange(system.n),
        side="right",
    )
    inside = labels[system.starts] == labels[system.stops - 1]
    if not inside.any():
        return -math.inf
    sums = system.sums(y - segmentation.fit())[inside]
    scaled = np.abs(sums) / system.weights[inside] - system.penalties[inside]
    return float(scaled.max())
