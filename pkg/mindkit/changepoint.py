"""
Multiscale change-point segmentation and jump-penalized least squares.

Breakpoints are one-based: a breakpoint ``tau`` means the signal jumps
between positions ``tau`` and ``tau + 1``, so it also is the zero-based
exclusive end of the segment on its left.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from mindkit.dictionaries import IntervalSystem
from mindkit.dictionaries import default_scale_penalties
from mindkit.dictionaries import interval_probes
from mindkit.exceptions import InfeasibleError
from mindkit.exceptions import InputError
from mindkit.exceptions import UnsupportedError
from mindkit.multiscale import monte_carlo_quantile


logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 14

Box = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class Segmentation:
    """
    A piecewise constant fit of length ``n``.

    ``boxes`` holds one ``[lo, hi]`` row of admissible levels per segment,
    or is ``None`` for segmentations without a multiscale constraint.
    """

    n: int
    breakpoints: Tuple[int, ...]
    levels: np.ndarray
    boxes: Optional[np.ndarray] = None

    def __post_init__(self):
        breakpoints = tuple(int(b) for b in self.breakpoints)
        if any(b < 1 or b >= self.n for b in breakpoints):
            raise InputError("Breakpoints must lie in [1, n - 1].")
        if any(a >= b for a, b in zip(breakpoints, breakpoints[1:])):
            raise InputError("Breakpoints must be sorted and distinct.")
        levels = np.asarray(self.levels, dtype=float)
        if levels.shape != (len(breakpoints) + 1,):
            raise InputError("Need one level per segment.")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "levels", levels)
        if self.boxes is not None:
            boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 2)
            if boxes.shape[0] != levels.size:
                raise InputError("Need one feasibility box per segment.")
            object.__setattr__(self, "boxes", boxes)

    @property
    def jumps(self) -> int:
        return len(self.breakpoints)

    def segments(self) -> List[Tuple[int, int]]:
        """
        Zero-based ``(start, stop)`` pairs, stop exclusive.
        """
        edges = (0,) + self.breakpoints + (self.n,)
        return list(zip(edges[:-1], edges[1:]))

    def fit(self) -> np.ndarray:
        lengths = np.diff((0,) + self.breakpoints + (self.n,))
        return np.repeat(self.levels, lengths)


def _prefix(y: np.ndarray):
    zero = np.zeros(1)
    return (
        np.concatenate([zero, np.cumsum(y)]),
        np.concatenate([zero, np.cumsum(y * y)]),
    )


def _interval_bounds(y: np.ndarray, system: IntervalSystem, q: float):
    lengths = system.lengths
    means = system.sums(y) / lengths
    radius = (q + system.penalties) / np.sqrt(lengths)
    return means - radius, means + radius


def _tolerance(y: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.abs(y).max()) if y.size else 1.0)


def segment_feasible_box(
    y, i: int, j: int, system: IntervalSystem, q: float
) -> Optional[Box]:
    """
    Levels ``mu`` for which every system interval inside ``[i, j]`` satisfies
    ``|sum (y - mu)| / sqrt(len) - s <= q``.

    :param y: Data vector.
    :param int i: First position of the segment, one-based.
    :param int j: Last position, inclusive.
    :returns: ``(lo, hi)``, or ``None`` when no level is admissible.
    """
    y = np.asarray(y, dtype=float)
    if not 1 <= i <= j <= system.n or y.shape != (system.n,):
        raise InputError("Segment must satisfy 1 <= i <= j <= n.")
    inside = (system.starts >= i - 1) & (system.stops <= j)
    if not inside.any():
        return (-math.inf, math.inf)
    lo, hi = _interval_bounds(y, system, q)
    box = (float(lo[inside].max()), float(hi[inside].min()))
    if box[0] > box[1] + _tolerance(y):
        return None
    return _collapsed(box)


def _collapsed(box: Box) -> Box:
    # A box empty only within tolerance shrinks to its midpoint.
    if box[0] > box[1]:
        mid = 0.5 * (box[0] + box[1])
        return (mid, mid)
    return box


def _clipped_level(mean: float, box: Box) -> float:
    return float(min(max(mean, box[0]), box[1]))


def mcps_solve(y, system: IntervalSystem, q: float) -> Segmentation:
    """
    Fewest-jump piecewise constant fit whose residuals pass the interval
    constraint on every system interval inside a segment.

    Dynamic programming over prefixes. For a fixed right end, the boxes of
    all candidate segments are maintained incrementally as reverse running
    maxima and minima. Among minimal-jump fits the one with the smallest
    residual sum of squares is returned; levels are segment means clipped
    into their boxes.

    :param y: Data vector of length ``system.n``.
    :param IntervalSystem system: Intervals with scale penalties.
    :param float q: Threshold.
    :rtype: Segmentation
    :raises InfeasibleError: If no segmentation satisfies the constraint.
    """
    y = np.asarray(y, dtype=float)
    n = system.n
    if y.shape != (n,):
        raise InputError("Data length does not match the interval system.")
    lo, hi = _interval_bounds(y, system, q)
    by_stop = np.argsort(system.stops, kind="stable")
    bounds = np.searchsorted(system.stops[by_stop], np.arange(n + 2))
    cs, cs2 = _prefix(y)
    tol = _tolerance(y)

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    count = np.full(n + 1, np.inf)
    count[0] = -1.0
    cost = np.zeros(n + 1)
    prev = np.zeros(n + 1, dtype=np.intp)
    level = np.zeros(n + 1)
    box = np.zeros((n + 1, 2))

    for e in range(1, n + 1):
        ids = by_stop[bounds[e] : bounds[e + 1]]
        if ids.size:
            cur_lo = np.full(e, -np.inf)
            cur_hi = np.full(e, np.inf)
            np.maximum.at(cur_lo, system.starts[ids], lo[ids])
            np.minimum.at(cur_hi, system.starts[ids], hi[ids])
            np.maximum(
                lower[:e], np.maximum.accumulate(cur_lo[::-1])[::-1], out=lower[:e]
            )
            np.minimum(
                upper[:e], np.minimum.accumulate(cur_hi[::-1])[::-1], out=upper[:e]
            )
        starts = np.nonzero(
            (lower[:e] <= upper[:e] + tol) & np.isfinite(count[:e])
        )[0]
        if starts.size == 0:
            continue
        length = e - starts
        s1 = cs[e] - cs[starts]
        s2 = cs2[e] - cs2[starts]
        lo_s, hi_s = lower[starts], upper[starts]
        mu = np.minimum(np.maximum(s1 / length, lo_s), hi_s)
        inverted = lo_s > hi_s
        mu[inverted] = 0.5 * (lo_s[inverted] + hi_s[inverted])
        sse = np.maximum(s2 - 2.0 * mu * s1 + length * mu * mu, 0.0)
        jumps = count[starts] + 1.0
        fewest = jumps.min()
        candidate = np.where(jumps == fewest, cost[starts] + sse, np.inf)
        k = int(np.argmin(candidate))
        count[e], cost[e] = fewest, candidate[k]
        prev[e], level[e] = starts[k], mu[k]
        box[e] = _collapsed((lower[starts[k]], upper[starts[k]]))

    if not np.isfinite(count[n]):
        raise InfeasibleError("No segmentation satisfies the multiscale constraint.")
    ends = []
    e = n
    while e > 0:
        ends.append(e)
        e = prev[e]
    ends.reverse()
    segmentation = Segmentation(
        n, tuple(ends[:-1]), level[ends], box[ends]
    )
    logger.debug("MCPS found %d jumps (q=%.6g)", segmentation.jumps, q)
    return segmentation


def brute_force_mcps(y, system: IntervalSystem, q: float) -> Segmentation:
    """
    Exhaustive search over all breakpoint patterns, by increasing jump count.
    Limited to ``n <= 14``.
    """
    y = np.asarray(y, dtype=float)
    n = system.n
    if n > BRUTE_FORCE_MAX_N:
        raise UnsupportedError(
            "Brute force is limited to n <= {0}.".format(BRUTE_FORCE_MAX_N)
        )
    if y.shape != (n,):
        raise InputError("Data length does not match the interval system.")
    cs, cs2 = _prefix(y)
    for m in range(n):
        best = None
        for cut in itertools.combinations(range(1, n), m):
            edges = (0,) + cut + (n,)
            boxes = []
            for a, b in zip(edges[:-1], edges[1:]):
                found = segment_feasible_box(y, a + 1, b, system, q)
                if found is None:
                    break
                boxes.append(found)
            else:
                levels, sse = [], 0.0
                for (a, b), found in zip(zip(edges[:-1], edges[1:]), boxes):
                    mu = _clipped_level((cs[b] - cs[a]) / (b - a), found)
                    levels.append(mu)
                    sse += cs2[b] - cs2[a] - 2 * mu * (cs[b] - cs[a]) + (b - a) * mu**2
                if best is None or sse < best[0]:
                    best = (sse, cut, levels, boxes)
        if best is not None:
            return Segmentation(n, best[1], np.array(best[2]), np.array(best[3]))
    raise InfeasibleError("No segmentation satisfies the multiscale constraint.")


def jump_penalized_ls(y, gamma: float) -> Segmentation:
    """
    Exact minimizer of ``1/2 ||y - fit||^2 + gamma * jumps`` over piecewise
    constant fits (Potts functional), by the quadratic-time dynamic program.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise InputError("Data must be a non-empty vector.")
    if gamma < 0:
        raise InputError("gamma must be nonnegative.")
    n = y.size
    if gamma == 0:
        return Segmentation(n, tuple(range(1, n)), y.copy())
    cs, cs2 = _prefix(y)
    best = np.zeros(n + 1)
    best[0] = -gamma
    prev = np.zeros(n + 1, dtype=np.intp)
    for e in range(1, n + 1):
        starts = np.arange(e)
        length = e - starts
        s1 = cs[e] - cs[starts]
        sse = np.maximum(cs2[e] - cs2[starts] - s1 * s1 / length, 0.0)
        candidate = best[:e] + gamma + 0.5 * sse
        k = int(np.argmin(candidate))
        best[e], prev[e] = candidate[k], k
    ends = []
    e = n
    while e > 0:
        ends.append(e)
        e = prev[e]
    ends.reverse()
    edges = np.array([0] + ends)
    means = (cs[edges[1:]] - cs[edges[:-1]]) / np.diff(edges)
    return Segmentation(n, tuple(ends[:-1]), means)


def potts_objective(y, segmentation: Segmentation, gamma: float) -> float:
    r = np.asarray(y, dtype=float) - segmentation.fit()
    return 0.5 * float(np.dot(r, r)) + gamma * segmentation.jumps


def bic_penalty(n: int, sigma: float) -> float:
    """
    The jump penalty ``2 sigma^2 log2(n)``.
    """
    return 2.0 * sigma * sigma * math.log2(n)


def default_system(n: int, variant=None) -> IntervalSystem:
    """
    Interval system with the default scale penalties.
    """
    return default_scale_penalties(n, IntervalSystem.build(n, variant))


def mcps(
    y,
    sigma: float,
    alpha: Optional[float] = None,
    system: Optional[IntervalSystem] = None,
    q: Optional[float] = None,
    reps: Optional[int] = None,
    seed: int = 0,
) -> Segmentation:
    """
    Segments ``y`` with the threshold calibrated by Monte Carlo unless ``q``
    is given.
    """
    y = np.asarray(y, dtype=float)
    if system is None:
        system = default_system(y.size)
    if q is None:
        q = monte_carlo_quantile(
            interval_probes(system), system.n, sigma, alpha, reps, seed
        ).q_alpha
    return mcps_solve(y, system, q)


def random_step_signal(
    n: int,
    jumps: int,
    seed: int,
    min_jump: float = 1.0,
    max_jump: float = 3.0,
    min_gap: int = 1,
) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """
    A piecewise constant signal with ``jumps`` random breakpoints at least
    ``min_gap`` apart and jump heights of random sign and size in
    ``[min_jump, max_jump]``.

    :returns: The signal and its one-based breakpoints.
    """
    if jumps < 0 or (jumps + 1) * min_gap > n:
        raise InputError("Cannot place {0} jumps in {1} samples.".format(jumps, n))
    rng = np.random.default_rng(seed)
    # Spread the free room over the jumps+1 segments, then add the minimum.
    slack = n - (jumps + 1) * min_gap
    room = np.sort(rng.choice(slack + jumps, jumps, replace=False)) - np.arange(jumps)
    breakpoints = tuple(int(b) for b in room + min_gap * np.arange(1, jumps + 1))
    steps = rng.uniform(min_jump, max_jump, jumps) * rng.choice([-1.0, 1.0], jumps)
    levels = np.concatenate([[0.0], np.cumsum(steps)])
    lengths = np.diff((0,) + breakpoints + (n,))
    return np.repeat(levels, lengths), breakpoints
