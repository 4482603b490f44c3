"""
Probe-functional systems: orthonormal bases, block partitions of a basis, and
interval systems, all wrapped into a common ``ProbeSystem``.
"""
import abc
import math
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from mindkit import settings
from mindkit.exceptions import InputError
from mindkit.model import DesignOperator


SQRT2 = math.sqrt(2.0)


def _check_length(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (n,):
        raise InputError(
            "Expected a vector of length {0}, got shape {1}.".format(n, v.shape)
        )
    return v


class OrthonormalBasis(abc.ABC):
    """
    An orthonormal basis of R^n given by its analysis and synthesis maps.
    """

    n: int

    @abc.abstractmethod
    def analyze(self, v) -> np.ndarray:
        ...

    @abc.abstractmethod
    def synthesize(self, coeffs) -> np.ndarray:
        ...

    def vectors(self) -> np.ndarray:
        """
        The basis vectors as rows of an ``n x n`` matrix.
        """
        return self.synthesize(np.eye(self.n))


class CanonicalBasis(OrthonormalBasis):
    """
    The standard basis; analysis and synthesis are the identity.
    """

    def __init__(self, n: int):
        self.n = n

    def analyze(self, v) -> np.ndarray:
        return _check_length(v, self.n).copy()

    def synthesize(self, coeffs) -> np.ndarray:
        return _check_length(coeffs, self.n).copy()


class HaarBasis(OrthonormalBasis):
    """
    Discrete orthonormal Haar basis of R^n with ``n = 2**J``.

    Coefficients are stored flat: position 0 holds the scaling coefficient and
    the wavelet ``(j, k)`` sits at position ``2**j + k``. Each wavelet is
    positive on the first half of its support and has unit Euclidean norm.
    """

    def __init__(self, J: int):
        if J < 0:
            raise InputError("Number of levels must be nonnegative.")
        self.J = J
        self.n = 2**J

    @classmethod
    def for_length(cls, n: int) -> "HaarBasis":
        if n < 1 or n & (n - 1):
            raise InputError("Haar basis needs a dyadic length, got {0}.".format(n))
        return cls(n.bit_length() - 1)

    def index(self, j: int, k: int) -> int:
        if not (0 <= j < self.J and 0 <= k < 2**j):
            raise InputError("No Haar wavelet at ({0}, {1}).".format(j, k))
        return 2**j + k

    def labels(self) -> List[Tuple]:
        """
        The index set: ``("scaling",)`` followed by ``(j, k)`` pairs.
        """
        out: List[Tuple] = [("scaling",)]
        for j in range(self.J):
            out.extend((j, k) for k in range(2**j))
        return out

    def level_slice(self, j: int) -> slice:
        return slice(2**j, 2 ** (j + 1))

    def analyze(self, v) -> np.ndarray:
        """
        Pyramid algorithm, O(n).
        """
        a = _check_length(v, self.n)
        coeffs = np.empty_like(a)
        while a.shape[-1] > 1:
            even = a[..., 0::2]
            odd = a[..., 1::2]
            m = even.shape[-1]
            coeffs[..., m : 2 * m] = (even - odd) / SQRT2
            a = (even + odd) / SQRT2
        coeffs[..., 0] = a[..., 0]
        return coeffs

    def synthesize(self, coeffs) -> np.ndarray:
        c = _check_length(coeffs, self.n)
        a = c[..., 0:1]
        m = 1
        while m < self.n:
            d = c[..., m : 2 * m]
            out = np.empty(c.shape[:-1] + (2 * m,))
            out[..., 0::2] = (a + d) / SQRT2
            out[..., 1::2] = (a - d) / SQRT2
            a = out
            m *= 2
        return np.array(a)


def analyze(basis: OrthonormalBasis, v) -> np.ndarray:
    return basis.analyze(v)


def synthesize(basis: OrthonormalBasis, coeffs) -> np.ndarray:
    return basis.synthesize(coeffs)


@dataclass(frozen=True)
class BlockPartition:
    """
    Disjoint index blocks of ``range(size)``.
    """

    blocks: Tuple[np.ndarray, ...]
    size: int
    covering: bool = field(init=False)

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=np.intp).ravel() for b in self.blocks)
        if not blocks or any(b.size == 0 for b in blocks):
            raise InputError("Blocks must be non-empty.")
        flat = np.concatenate(blocks)
        if flat.min() < 0 or flat.max() >= self.size:
            raise InputError("Block index out of range.")
        if np.unique(flat).size != flat.size:
            raise InputError("Blocks must be pairwise disjoint.")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "covering", flat.size == self.size)

    @classmethod
    def singletons(cls, size: int) -> "BlockPartition":
        return cls(tuple(np.array([i]) for i in range(size)), size)

    @classmethod
    def contiguous(cls, size: int, block_size: int) -> "BlockPartition":
        edges = list(range(0, size, block_size)) + [size]
        return cls(
            tuple(np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])), size
        )

    @classmethod
    def haar_levels(
        cls, basis: HaarBasis, block_size: Optional[int] = None
    ) -> "BlockPartition":
        """
        Blocks of consecutive locations within each scale of a Haar basis.
        The scaling coefficient forms its own block. The default block
        length is ``floor(log n)``.
        """
        if block_size is None:
            block_size = max(1, int(math.log(basis.n))) if basis.n > 1 else 1
        blocks = [np.array([0])]
        for j in range(basis.J):
            level = np.arange(2**j, 2 ** (j + 1))
            for start in range(0, level.size, block_size):
                blocks.append(level[start : start + block_size])
        return cls(tuple(blocks), basis.n)

    @property
    def order(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks])

    def require_covering(self):
        if not self.covering:
            raise InputError("Partition does not cover the whole index set.")


def block_norms(coeffs: np.ndarray, partition: BlockPartition) -> np.ndarray:
    """
    Euclidean norm of every block of a coefficient vector.
    """
    coeffs = _check_length(coeffs, partition.size)
    return np.array([np.linalg.norm(coeffs[..., b], axis=-1) for b in partition.blocks])


class IntervalVariant(Enum):
    ALL = "all"
    DYADIC_LENGTHS = "dyadic"


def resolve_variant(n: int, variant: Optional[str] = None) -> IntervalVariant:
    """
    ``None`` or ``"auto"`` picks all intervals up to the cutover length and
    dyadic lengths beyond.
    """
    if variant is None or variant == "auto":
        if n <= settings.get("MINDKIT_INTERVAL_CUTOVER"):
            return IntervalVariant.ALL
        return IntervalVariant.DYADIC_LENGTHS
    if isinstance(variant, IntervalVariant):
        return variant
    return IntervalVariant(variant)


@dataclass(frozen=True)
class IntervalSystem:
    """
    Discrete intervals of ``{0, ..., n-1}``. Interval ``t`` covers
    ``y[starts[t]:stops[t]]``; in one-based inclusive notation this is the
    pair ``(starts[t] + 1, stops[t])``.
    """

    n: int
    starts: np.ndarray
    stops: np.ndarray
    penalties: np.ndarray
    variant: Optional[IntervalVariant] = None

    def __post_init__(self):
        if self.starts.size == 0:
            raise InputError("Interval system is empty.")
        if (
            self.starts.shape != self.stops.shape
            or self.penalties.shape != self.starts.shape
        ):
            raise InputError("Interval arrays must have equal length.")
        if (self.starts < 0).any() or (self.stops > self.n).any():
            raise InputError("Interval outside [1, n].")
        if (self.stops <= self.starts).any():
            raise InputError("Intervals must be non-empty.")
        if (self.penalties < 0).any():
            raise InputError("Scale penalties must be nonnegative.")

    @classmethod
    def build(cls, n: int, variant=None) -> "IntervalSystem":
        if n < 1:
            raise InputError("Interval system needs n >= 1.")
        variant = resolve_variant(n, variant)
        if variant is IntervalVariant.ALL:
            starts, stops = np.triu_indices(n + 1, k=1)
        else:
            starts_l, stops_l = [], []
            length = 1
            while length <= n:
                s = np.arange(0, n - length + 1)
                starts_l.append(s)
                stops_l.append(s + length)
                length *= 2
            starts, stops = np.concatenate(starts_l), np.concatenate(stops_l)
        starts = starts.astype(np.intp)
        stops = stops.astype(np.intp)
        return cls(n, starts, stops, np.zeros(starts.size), variant)

    @classmethod
    def from_pairs(cls, n: int, pairs: Sequence[Tuple[int, int]]) -> "IntervalSystem":
        """
        Builds a system from one-based inclusive ``(i, j)`` pairs.
        """
        arr = np.array(pairs, dtype=np.intp).reshape(-1, 2)
        if (arr[:, 0] < 1).any() or (arr[:, 1] < arr[:, 0]).any():
            raise InputError("Intervals must satisfy 1 <= i <= j <= n.")
        return cls(n, arr[:, 0] - 1, arr[:, 1].copy(), np.zeros(arr.shape[0]))

    def __len__(self) -> int:
        return int(self.starts.size)

    @property
    def lengths(self) -> np.ndarray:
        return self.stops - self.starts

    @property
    def weights(self) -> np.ndarray:
        return np.sqrt(self.lengths)

    def pairs(self) -> List[Tuple[int, int]]:
        return [(int(a) + 1, int(b)) for a, b in zip(self.starts, self.stops)]

    def with_penalties(self, penalties) -> "IntervalSystem":
        return replace(self, penalties=np.asarray(penalties, dtype=float))

    def sums(self, v) -> np.ndarray:
        """
        Sum of ``v`` over every interval, from prefix sums.
        """
        v = _check_length(v, self.n)
        cs = np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(v, axis=-1)], -1)
        return cs[..., self.stops] - cs[..., self.starts]

    def spread(self, z) -> np.ndarray:
        """
        Adjoint of :meth:`sums`: entry ``k`` collects ``z`` over all intervals
        containing ``k``.
        """
        z = np.asarray(z, dtype=float)
        if z.ndim > 1:
            return np.stack([self.spread(row) for row in z.reshape(-1, z.shape[-1])])
        size = self.n + 1
        diff = np.bincount(self.starts, weights=z, minlength=size) - np.bincount(
            self.stops, weights=z, minlength=size
        )
        return np.cumsum(diff)[: self.n]


def nemirovskii_norm(v, system: IntervalSystem) -> float:
    """
    ``max_B |sum_{i in B} v_i| / sqrt(|B|)`` over the intervals of the system.
    """
    return float(np.max(np.abs(system.sums(v)) / system.weights))


def default_scale_penalties(n: int, system: IntervalSystem) -> IntervalSystem:
    """
    Attaches ``s = sqrt(2 log(n / length))`` to every interval.
    """
    if n < 1:
        raise InputError("n must be positive.")
    ratio = np.maximum(n / system.lengths, 1.0)
    return system.with_penalties(np.sqrt(2.0 * np.log(ratio)))


def coherence_count(vectors, rho: float) -> int:
    """
    Number of ordered pairs ``(l, m)``, diagonal included, with
    ``|<phi_l, phi_m>| >= rho``.

    :param vectors: Unit vectors as rows.
    :param float rho: Level in (0, 1).
    :rtype: int
    """
    if not 0.0 < rho < 1.0:
        raise InputError("rho must lie in (0, 1).")
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if np.abs(np.linalg.norm(vectors, axis=1) - 1.0).max() > 1e-8:
        raise InputError("All vectors must have unit norm.")
    total = 0
    step = max(1, 4_000_000 // max(1, vectors.shape[0]))
    for start in range(0, vectors.shape[0], step):
        gram = vectors[start : start + step] @ vectors.T
        total += int(np.count_nonzero(np.abs(gram) >= rho))
    return total


class ProbeKind(Enum):
    IDENTITY = "identity"
    BASIS = "basis"
    BLOCKS = "blocks"
    INTERVALS = "intervals"
    MATRIX = "matrix"


@dataclass(frozen=True)
class ProbeSystem:
    """
    Family of linear probes ``T_a: R^n -> R^{n_a}`` with weights ``w_a > 0``
    and scale penalties ``s_a >= 0``.

    All probe outputs are stacked into one response vector of length
    ``sum(n_a)``; ``forward`` computes it and ``adjoint`` is its transpose.
    ``orthogonal`` marks systems whose stacked map is an orthogonal matrix.
    """

    n: int
    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    sizes: np.ndarray
    weights: np.ndarray
    penalties: np.ndarray
    kind: ProbeKind = ProbeKind.MATRIX
    orthogonal: bool = False

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.intp)
        if sizes.size == 0:
            raise InputError("Probe system is empty.")
        if (sizes < 1).any():
            raise InputError("Every probe needs at least one output.")
        weights = np.broadcast_to(np.asarray(self.weights, float), sizes.shape)
        penalties = np.broadcast_to(np.asarray(self.penalties, float), sizes.shape)
        if not (weights > 0).all():
            raise InputError("Probe weights must be strictly positive.")
        if not (penalties >= 0).all():
            raise InputError("Probe penalties must be nonnegative.")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "weights", np.array(weights))
        object.__setattr__(self, "penalties", np.array(penalties))

    def __len__(self) -> int:
        return int(self.sizes.size)

    @property
    def m(self) -> int:
        return int(self.sizes.sum())

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def scalar(self) -> bool:
        return bool((self.sizes == 1).all())

    def responses(self, r) -> np.ndarray:
        return self.forward(_check_length(r, self.n))

    def group_norms(self, z: np.ndarray) -> np.ndarray:
        """
        Euclidean norm of every probe's block of a response vector.
        """
        if self.scalar:
            return np.abs(z)
        return np.sqrt(np.add.reduceat(z * z, self.offsets[:-1], axis=-1))

    def statistic(self, r) -> np.ndarray:
        """
        ``max_a ||T_a r|| / w_a - s_a``; batched over leading axes.
        """
        scaled = self.group_norms(self.responses(r)) / self.weights - self.penalties
        return scaled.max(axis=-1)

    def radii(self, q: float) -> np.ndarray:
        """
        Per-probe ball radius ``(q + s_a) w_a`` of the constraint at level q.
        """
        return (q + self.penalties) * self.weights

    def with_weights(self, weights) -> "ProbeSystem":
        return replace(self, weights=weights)

    def with_penalties(self, penalties) -> "ProbeSystem":
        return replace(self, penalties=penalties)

    def through_adjoint(self, op: DesignOperator) -> "ProbeSystem":
        """
        The probes ``T_a X^T`` acting on data-space vectors.
        """
        if op.p != self.n:
            raise InputError("Probe dimension does not match the operator.")
        forward, adjoint = self.forward, self.adjoint
        return replace(
            self,
            n=op.n,
            forward=lambda r: forward(op.apply_adjoint(r)),
            adjoint=lambda z: op.apply(adjoint(z)),
            orthogonal=False,
        )

    def as_operator(self) -> LinearOperator:
        return LinearOperator(
            (self.m, self.n), matvec=self.forward, rmatvec=self.adjoint, dtype=float
        )


def identity_probe(n: int, weight: float = 1.0) -> ProbeSystem:
    """
    A single probe ``T = I`` with ``n_a = n``.
    """
    return ProbeSystem(
        n,
        lambda r: np.array(r, dtype=float),
        lambda z: np.array(z, dtype=float),
        np.array([n]),
        weight,
        0.0,
        ProbeKind.IDENTITY,
        True,
    )


def basis_probes(basis: OrthonormalBasis, weights=1.0) -> ProbeSystem:
    """
    One scalar probe ``<phi_l, .>`` per basis vector.
    """
    return ProbeSystem(
        basis.n,
        basis.analyze,
        basis.synthesize,
        np.ones(basis.n, dtype=np.intp),
        weights,
        0.0,
        ProbeKind.BASIS,
        True,
    )


def block_probes(
    basis: OrthonormalBasis, partition: BlockPartition, weights=1.0
) -> ProbeSystem:
    """
    One probe per block, returning the block's basis coefficients.
    """
    if partition.size != basis.n:
        raise InputError("Partition size does not match the basis.")
    order = partition.order

    def forward(r):
        return basis.analyze(r)[..., order]

    def adjoint(z):
        z = np.asarray(z, dtype=float)
        coeffs = np.zeros(z.shape[:-1] + (basis.n,))
        coeffs[..., order] = z
        return basis.synthesize(coeffs)

    return ProbeSystem(
        basis.n,
        forward,
        adjoint,
        partition.sizes,
        weights,
        0.0,
        ProbeKind.BLOCKS,
        partition.covering,
    )


def interval_probes(system: IntervalSystem) -> ProbeSystem:
    """
    Scalar probes ``sum_{i in B} r_i`` with weight ``sqrt(|B|)`` and the
    system's scale penalties.
    """
    return ProbeSystem(
        system.n,
        system.sums,
        system.spread,
        np.ones(len(system), dtype=np.intp),
        system.weights,
        system.penalties,
        ProbeKind.INTERVALS,
        False,
    )


def matrix_probes(
    rows, weights=1.0, partition: Optional[BlockPartition] = None
) -> ProbeSystem:
    """
    Probes given by the rows of a matrix. Without a partition each row is its
    own scalar probe; with one, rows are grouped block by block.
    """
    rows = np.ascontiguousarray(rows, dtype=float)
    if rows.ndim != 2:
        raise InputError("Probe rows must form a matrix.")
    if partition is None:
        sizes = np.ones(rows.shape[0], dtype=np.intp)
    else:
        if partition.size != rows.shape[0]:
            raise InputError("Partition size does not match the number of rows.")
        rows = rows[partition.order]
        sizes = partition.sizes
    return ProbeSystem(
        rows.shape[1],
        lambda r: np.asarray(r, dtype=float) @ rows.T,
        lambda z: np.asarray(z, dtype=float) @ rows,
        sizes,
        weights,
        0.0,
        ProbeKind.MATRIX,
        False,
    )
