"""
Linear observation models ``Y = X beta + noise`` and their simulation.

Vectors are numpy arrays whose *last* axis is the vector axis, so every
operator here also acts row-wise on a batch of vectors.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from mindkit.exceptions import InputError


class OperatorKind(Enum):
    IDENTITY = "identity"
    CUMULATIVE_SUM = "cumulative_sum"
    DENSE = "dense"


@dataclass(frozen=True)
class DesignOperator:
    """
    The system matrix X with ``n`` observations and ``p`` parameters.

    ``cumulative_sum`` is the lower-triangular matrix of ones that maps jump
    sizes to a piecewise constant signal. ``dense`` keeps its ``entries`` as
    a C-ordered (row-major) array.
    """

    kind: OperatorKind
    n: int
    p: int
    entries: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InputError("Operator dimensions must be positive.")
        if self.kind is OperatorKind.DENSE:
            if self.entries is None or self.entries.shape != (self.n, self.p):
                raise InputError("Dense operator needs an n x p matrix.")
        elif self.n != self.p:
            raise InputError(
                "{0} operator requires n == p, got {1} x {2}.".format(
                    self.kind.value, self.n, self.p
                )
            )

    @classmethod
    def identity(cls, n: int) -> "DesignOperator":
        return cls(OperatorKind.IDENTITY, n, n)

    @classmethod
    def cumulative_sum(cls, n: int) -> "DesignOperator":
        return cls(OperatorKind.CUMULATIVE_SUM, n, n)

    @classmethod
    def dense(cls, matrix) -> "DesignOperator":
        entries = np.ascontiguousarray(matrix, dtype=float)
        if entries.ndim != 2:
            raise InputError("Dense operator needs a two-dimensional matrix.")
        entries.setflags(write=False)
        return cls(OperatorKind.DENSE, entries.shape[0], entries.shape[1], entries)

    @property
    def is_identity(self) -> bool:
        return self.kind is OperatorKind.IDENTITY

    def apply(self, beta) -> np.ndarray:
        """
        Computes ``X beta``.

        :param beta: Parameter vector(s), last axis of length ``p``.
        :rtype: numpy.ndarray
        :returns: Vector(s) with last axis of length ``n``.
        """
        beta = np.asarray(beta, dtype=float)
        if beta.shape[-1:] != (self.p,):
            raise InputError(
                "Expected a vector of length {0}, got shape {1}.".format(
                    self.p, beta.shape
                )
            )
        if self.kind is OperatorKind.IDENTITY:
            return beta.copy()
        if self.kind is OperatorKind.CUMULATIVE_SUM:
            return np.cumsum(beta, axis=-1)
        return beta @ self.entries.T

    def apply_adjoint(self, v) -> np.ndarray:
        """
        Computes ``X^T v``. For the cumulative sum this is the reversed
        prefix sum, entry ``j`` being the sum of ``v[j:]``.

        :param v: Data-space vector(s), last axis of length ``n``.
        :rtype: numpy.ndarray
        :returns: Vector(s) with last axis of length ``p``.
        """
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.n,):
            raise InputError(
                "Expected a vector of length {0}, got shape {1}.".format(
                    self.n, v.shape
                )
            )
        if self.kind is OperatorKind.IDENTITY:
            return v.copy()
        if self.kind is OperatorKind.CUMULATIVE_SUM:
            return np.flip(np.cumsum(np.flip(v, axis=-1), axis=-1), axis=-1)
        return v @ self.entries

    def to_matrix(self) -> np.ndarray:
        if self.kind is OperatorKind.IDENTITY:
            return np.eye(self.n)
        if self.kind is OperatorKind.CUMULATIVE_SUM:
            return np.tril(np.ones((self.n, self.n)))
        return np.array(self.entries)

    def norm(self) -> float:
        """
        Spectral norm of X.
        """
        if self.kind is OperatorKind.IDENTITY:
            return 1.0
        if self.kind is OperatorKind.CUMULATIVE_SUM:
            # Largest singular value of the lower-triangular ones matrix.
            return 1.0 / (2.0 * math.sin(math.pi / (4 * self.n + 2)))
        return float(np.linalg.norm(self.entries, 2))


@dataclass(frozen=True)
class Observation:
    """
    Observed data ``y`` with known noise level ``sigma``. ``seed`` records the
    generator seed when the data was simulated.
    """

    y: np.ndarray
    sigma: float
    seed: Optional[int] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise InputError("Observation must be a non-empty vector.")
        if not self.sigma >= 0:
            raise InputError("Noise level must be nonnegative.")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]


def apply(op: DesignOperator, beta) -> np.ndarray:
    return op.apply(beta)


def apply_adjoint(op: DesignOperator, v) -> np.ndarray:
    return op.apply_adjoint(v)


def noise(n: int, sigma: float, seed: int) -> np.ndarray:
    """
    Draws ``n`` i.i.d. Gaussian(0, sigma^2) values.

    Uses numpy's PCG64 bit generator and its ziggurat normal sampler, so a
    given seed always produces the same vector.
    """
    rng = np.random.default_rng(seed)
    return sigma * rng.standard_normal(n)


def simulate(op: DesignOperator, beta, sigma: float, seed: int) -> Observation:
    """
    Simulates ``Y = X beta + eps`` with Gaussian noise.

    :param DesignOperator op: The design.
    :param beta: True parameter of length ``p``.
    :param float sigma: Noise standard deviation; 0 gives noise-free data.
    :param int seed: Generator seed.
    :rtype: Observation
    """
    if sigma < 0:
        raise InputError("Noise level must be nonnegative.")
    signal = op.apply(beta)
    if signal.ndim != 1:
        raise InputError("simulate expects a single parameter vector.")
    return Observation(signal + noise(op.n, sigma, seed), sigma, seed)
