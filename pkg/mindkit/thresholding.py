"""
Coefficient-wise and block shrinkage in an orthonormal basis, and checks that
a candidate estimate solves the matching multiscale program.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional
from typing import Union

import numpy as np

from mindkit import settings
from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import OrthonormalBasis
from mindkit.exceptions import InputError
from mindkit.model import Observation


logger = logging.getLogger(__name__)


class Theta(Enum):
    """
    Exponents of the shrinkage family that are not a finite number.
    """

    HARD = "hard"


SOFT = 1.0
GARROTE = 2.0

ThetaLike = Union[float, Theta]


def parse_theta(value) -> ThetaLike:
    """
    Accepts ``soft``, ``garrote``, ``hard``, or a positive number.
    """
    if isinstance(value, Theta):
        return value
    names = {"soft": SOFT, "garrote": GARROTE, "hard": Theta.HARD}
    if isinstance(value, str) and value.lower() in names:
        return names[value.lower()]
    try:
        theta = float(value)
    except (TypeError, ValueError):
        raise InputError("Unknown shrinkage exponent {0!r}.".format(value))
    if theta == np.inf:
        return Theta.HARD
    if not theta > 0:
        raise InputError("Shrinkage exponent must be positive.")
    return theta


def _data(obs) -> np.ndarray:
    if isinstance(obs, Observation):
        return obs.y
    return np.asarray(obs, dtype=float)


def _positive(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if not (q > 0).all():
        raise InputError("Thresholds must be strictly positive.")
    return q


@dataclass(frozen=True)
class ShrinkageRule:
    """
    The rule ``x -> x (1 - q^theta / |x|^theta)_+`` with per-index
    thresholds. ``theta`` is 1 for soft, 2 for garrote and ``Theta.HARD``
    for hard thresholding.
    """

    theta: ThetaLike
    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", parse_theta(self.theta))
        object.__setattr__(self, "thresholds", _positive(self.thresholds))

    @classmethod
    def soft(cls, q) -> "ShrinkageRule":
        return cls(SOFT, q)

    @classmethod
    def garrote(cls, q) -> "ShrinkageRule":
        return cls(GARROTE, q)

    @classmethod
    def hard(cls, q) -> "ShrinkageRule":
        return cls(Theta.HARD, q)

    @property
    def name(self) -> str:
        if self.theta is Theta.HARD:
            return "hard"
        return {SOFT: "soft", GARROTE: "garrote"}.get(self.theta, str(self.theta))

    def __call__(self, coeffs) -> np.ndarray:
        return eta_theta(coeffs, self.thresholds, self.theta)


def eta_theta(x, q, theta: ThetaLike = SOFT):
    """
    Applies ``eta_theta(x, q) = x (1 - q^theta / |x|^theta)_+`` elementwise.

    :param x: Coefficient or array of coefficients.
    :param q: Strictly positive threshold(s), broadcast against ``x``.
    :param theta: Positive exponent or ``Theta.HARD``.
    :returns: Shrunk coefficient(s), same shape as the broadcast inputs.
    """
    theta = parse_theta(theta)
    q = _positive(q)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    keep = ax > q
    if theta is Theta.HARD:
        return np.where(keep, x, 0.0)[()]
    ratio = np.broadcast_to(q, keep.shape) / np.where(keep, ax, 1.0)
    factor = np.where(keep, 1.0 - ratio**theta, 0.0)
    return (x * factor)[()]


def weighted_soft(coeffs, w) -> np.ndarray:
    """
    Soft thresholding with nonnegative weights; a zero weight keeps the
    coefficient unchanged.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    w = np.asarray(w, dtype=float)
    if (w < 0).any():
        raise InputError("Weights must be nonnegative.")
    return np.sign(coeffs) * np.maximum(np.abs(coeffs) - w, 0.0)


def garrote_weights(coeffs, q) -> np.ndarray:
    """
    Data-dependent weights ``q^2 / max(q, |c|)`` under which soft
    thresholding reproduces the garrote.
    """
    q = _positive(q)
    return q * q / np.maximum(q, np.abs(np.asarray(coeffs, dtype=float)))


def hard_weights(coeffs, q) -> np.ndarray:
    """
    Weights reproducing hard thresholding: ``q`` where ``|c| <= q`` and 0
    elsewhere. A zero weight pins the coefficient to the data (``0/0 = 1``).
    """
    q = _positive(q)
    c = np.abs(np.asarray(coeffs, dtype=float))
    return np.where(c <= q, np.broadcast_to(q, c.shape), 0.0)


def wavelet_threshold(obs, basis: OrthonormalBasis, rule: ShrinkageRule) -> np.ndarray:
    """
    Shrinks every basis coefficient of the data and synthesizes the result.

    :param obs: An Observation or a data vector.
    :param OrthonormalBasis basis: Analysis basis.
    :param ShrinkageRule rule: Exponent and thresholds.
    :rtype: numpy.ndarray
    """
    coeffs = basis.analyze(_data(obs))
    shrunk = rule(coeffs)
    logger.debug(
        "%s thresholding kept %d of %d coefficients",
        rule.name,
        np.count_nonzero(shrunk),
        shrunk.size,
    )
    return basis.synthesize(shrunk)


def _grouped(coeffs: np.ndarray, partition: BlockPartition):
    partition.require_covering()
    if coeffs.shape[-1] != partition.size:
        raise InputError("Coefficient length does not match the partition.")
    ordered = coeffs[..., partition.order]
    offsets = np.concatenate([[0], np.cumsum(partition.sizes)])[:-1]
    norms = np.sqrt(np.add.reduceat(ordered * ordered, offsets, axis=-1))
    return ordered, norms


def _ungroup(ordered: np.ndarray, partition: BlockPartition) -> np.ndarray:
    out = np.empty_like(ordered)
    out[..., partition.order] = ordered
    return out


def block_norms_of(coeffs, partition: BlockPartition) -> np.ndarray:
    return _grouped(np.asarray(coeffs, dtype=float), partition)[1]


def block_shrink(coeffs, partition: BlockPartition, q, theta: ThetaLike = SOFT):
    """
    Scales each block ``x`` by ``(1 - q_a^theta / ||x||^theta)_+``.
    """
    theta = parse_theta(theta)
    q = _positive(q)
    if theta is Theta.HARD:
        raise InputError("Block shrinkage needs a finite exponent.")
    ordered, norms = _grouped(np.asarray(coeffs, dtype=float), partition)
    q = np.broadcast_to(q, norms.shape)
    keep = norms > q
    factor = np.where(keep, 1.0 - (q / np.where(keep, norms, 1.0)) ** theta, 0.0)
    return _ungroup(ordered * np.repeat(factor, partition.sizes, axis=-1), partition)


def block_garrote_weights(coeffs, partition: BlockPartition, q) -> np.ndarray:
    """
    Per-block weights ``q_a^2 / max(q_a, ||B_a c||)``.
    """
    q = _positive(q)
    norms = block_norms_of(coeffs, partition)
    return q * q / np.maximum(q, norms)


def block_threshold(
    obs,
    basis: OrthonormalBasis,
    partition: BlockPartition,
    thresholds,
    theta: ThetaLike = SOFT,
) -> np.ndarray:
    """
    Block soft (``theta=1``) or block garrote (``theta=2``) estimator.
    """
    coeffs = basis.analyze(_data(obs))
    return basis.synthesize(block_shrink(coeffs, partition, thresholds, theta))


@dataclass(frozen=True)
class CharacterizationReport:
    """
    Outcome of checking an estimate against the coefficient-wise program.

    ``margin`` is ``1 - max |<phi, Y - beta>| / q``; it is negative when the
    constraint is violated. ``gap`` is the largest distance of a coefficient
    from the minimum-modulus point of its feasible interval.
    """

    feasible: bool
    coefficientwise_minimal: bool
    margin: float
    gap: float

    @property
    def passed(self) -> bool:
        return self.feasible and self.coefficientwise_minimal


def verify_characterization(
    beta_hat, obs, basis: OrthonormalBasis, thresholds, tol: Optional[float] = None
) -> CharacterizationReport:
    """
    Checks that ``beta_hat`` solves ``min sum |<phi, beta>|^r`` subject to
    ``|<phi, Y - beta>| <= q`` for every basis vector.

    The program separates over coefficients, so the unique solution is the
    point of ``[c - q, c + q]`` closest to zero. Zero thresholds are allowed
    and pin the coefficient to the data.
    """
    if tol is None:
        tol = settings.get("MINDKIT_FEASIBILITY_TOL")
    q = np.broadcast_to(np.asarray(thresholds, dtype=float), (basis.n,))
    if (q < 0).any():
        raise InputError("Thresholds must be nonnegative.")
    c = basis.analyze(_data(obs))
    b = basis.analyze(beta_hat)
    scale = max(1.0, float(np.abs(c).max()))
    residual = np.abs(c - b)
    pinned = q == 0
    ratio = np.where(pinned, 0.0, residual / np.where(pinned, 1.0, q))
    feasible = bool(
        (ratio <= 1.0 + tol).all() and (residual[pinned] <= tol * scale).all()
    )
    gap = float(np.abs(b - weighted_soft(c, q)).max())
    margin = 1.0 - float(ratio.max()) if (~pinned).any() else 0.0
    return CharacterizationReport(feasible, gap <= tol * scale, margin, gap)


@dataclass(frozen=True)
class BlockCharacterizationReport:
    """
    ``feasible``: every block of residual coefficients has sup-norm at most
    ``q_a``. ``blockwise_minimal``: every block of the estimate is the
    minimum-norm point of the Euclidean ball of radius ``q_a`` around the
    data block.
    """

    feasible: bool
    blockwise_minimal: bool
    margin: float
    gap: float

    @property
    def passed(self) -> bool:
        return self.feasible and self.blockwise_minimal


def verify_block_characterization(
    beta_hat,
    obs,
    basis: OrthonormalBasis,
    partition: BlockPartition,
    thresholds,
    tol: Optional[float] = None,
) -> BlockCharacterizationReport:
    if tol is None:
        tol = settings.get("MINDKIT_FEASIBILITY_TOL")
    q = _positive(thresholds)
    c = basis.analyze(_data(obs))
    b = basis.analyze(beta_hat)
    scale = max(1.0, float(np.abs(c).max()))
    residual, _ = _grouped(c - b, partition)
    q_full = np.repeat(np.broadcast_to(q, (len(partition.blocks),)), partition.sizes)
    ratio = np.abs(residual) / q_full
    gap = float(np.abs(b - block_shrink(c, partition, q, SOFT)).max())
    return BlockCharacterizationReport(
        bool((ratio <= 1.0 + tol).all()),
        gap <= tol * scale,
        1.0 - float(ratio.max()),
        gap,
    )
