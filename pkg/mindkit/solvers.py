"""
Convex solvers for multiscale constrained and penalized estimation.

``pdhg_solve`` handles every convex constrained program through one
primal-dual engine. Penalized and fidelity-constrained programs reuse the
engine unless an exact solver exists for the combination of design and
regularizer.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
from scipy import linalg
from scipy import optimize
from scipy import sparse
from scipy.sparse.linalg import LinearOperator
from scipy.sparse.linalg import aslinearoperator
from scipy.sparse.linalg import spsolve

from mindkit import settings
from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import CanonicalBasis
from mindkit.dictionaries import OrthonormalBasis
from mindkit.dictionaries import basis_probes
from mindkit.dictionaries import block_probes
from mindkit.exceptions import InfeasibleError
from mindkit.exceptions import InputError
from mindkit.exceptions import MindError
from mindkit.exceptions import UnsupportedError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.multiscale import MultiscaleConstraint
from mindkit.multiscale import multiscale_statistic
from mindkit.thresholding import weighted_soft


logger = logging.getLogger(__name__)

Design = Union[DesignOperator, np.ndarray]


class RegularizerKind(Enum):
    SQ_DIFF = "sq_diff"
    TV = "tv"
    L1_COEFF = "l1_coeff"
    BLOCK_L1 = "block_l1"
    SOBOLEV_KQ = "sobolev_kq"
    L2_SQ = "l2_sq"
    JUMP_COUNT = "jump_count"


SOBOLEV_NORMS = (1.0, 2.0, math.inf)


def difference_matrix(p: int, order: int = 1) -> sparse.csr_matrix:
    """
    The forward difference ``Delta^order`` as a sparse ``(p - order) x p``
    matrix. Order 0 is the identity.
    """
    if order < 0 or order >= p:
        raise InputError(
            "Difference order {0} needs 0 <= order < p = {1}.".format(order, p)
        )
    result = sparse.identity(p, format="csr")
    for k in range(order):
        rows = p - k
        step = sparse.diags(
            [-np.ones(rows - 1), np.ones(rows - 1)], [0, 1], shape=(rows - 1, rows)
        )
        result = step @ result
    return sparse.csr_matrix(result)


@dataclass(frozen=True, eq=False)
class Regularizer:
    """
    A functional ``R`` on the parameter space.

    * ``sq_diff``: ``1/2 ||Delta^order beta||^2`` (smoothing spline).
    * ``tv``: ``||Delta^order beta||_1``; order 1 is total variation, higher
      orders give trend filtering.
    * ``l1_coeff``: ``sum w |<phi, beta>|`` over a basis (default canonical).
    * ``block_l1``: ``sum_a w_a ||B_a coeffs||_2`` over a partition.
    * ``sobolev_kq``: ``sum_{l <= order} ||Delta^l beta||_norm``.
    * ``l2_sq``: ``1/2 ||beta||^2``, or ``1/2 ||A beta||^2`` with an operator.
    * ``jump_count``: number of nonzero first differences (not convex).
    """

    kind: RegularizerKind
    order: int = 1
    norm: float = 2.0
    basis: Optional[OrthonormalBasis] = None
    partition: Optional[BlockPartition] = None
    weights: Union[float, np.ndarray] = 1.0
    operator: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = self.kind
        if kind in (RegularizerKind.SQ_DIFF, RegularizerKind.TV) and self.order < 1:
            raise InputError("Difference order must be at least 1.")
        if kind is RegularizerKind.SOBOLEV_KQ:
            if self.order < 0:
                raise InputError("Sobolev order must be nonnegative.")
            if float(self.norm) not in SOBOLEV_NORMS:
                raise UnsupportedError("Sobolev norm exponent must be 1, 2 or inf.")
        if kind is RegularizerKind.BLOCK_L1 and self.partition is None:
            raise InputError("block_l1 needs a partition.")
        weights = np.asarray(self.weights, dtype=float)
        if (weights < 0).any():
            raise InputError("Regularizer weights must be nonnegative.")
        if kind is RegularizerKind.BLOCK_L1:
            weights = np.broadcast_to(weights, (len(self.partition.blocks),))
            if not (weights > 0).all():
                raise InputError("Block weights must be strictly positive.")
        object.__setattr__(self, "weights", weights)
        if self.operator is not None:
            object.__setattr__(
                self, "operator", np.ascontiguousarray(self.operator, dtype=float)
            )

    @classmethod
    def sq_diff(cls, order: int = 1) -> "Regularizer":
        return cls(RegularizerKind.SQ_DIFF, order=order)

    @classmethod
    def tv(cls, order: int = 1) -> "Regularizer":
        return cls(RegularizerKind.TV, order=order)

    @classmethod
    def l1_coeff(
        cls, basis: Optional[OrthonormalBasis] = None, weights=1.0
    ) -> "Regularizer":
        return cls(RegularizerKind.L1_COEFF, basis=basis, weights=weights)

    @classmethod
    def block_l1(
        cls,
        partition: BlockPartition,
        weights=1.0,
        basis: Optional[OrthonormalBasis] = None,
    ) -> "Regularizer":
        return cls(
            RegularizerKind.BLOCK_L1, basis=basis, partition=partition, weights=weights
        )

    @classmethod
    def sobolev(cls, order: int = 1, norm: float = 2.0) -> "Regularizer":
        return cls(RegularizerKind.SOBOLEV_KQ, order=order, norm=float(norm))

    @classmethod
    def l2_sq(cls, operator=None) -> "Regularizer":
        return cls(RegularizerKind.L2_SQ, operator=operator)

    @classmethod
    def jump_count(cls) -> "Regularizer":
        return cls(RegularizerKind.JUMP_COUNT)

    @property
    def convex(self) -> bool:
        return self.kind is not RegularizerKind.JUMP_COUNT

    def coefficients(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        return beta if self.basis is None else self.basis.analyze(beta)

    def __call__(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        kind = self.kind
        if kind is RegularizerKind.SQ_DIFF:
            return 0.5 * float(np.sum(np.diff(beta, self.order) ** 2))
        if kind is RegularizerKind.TV:
            return float(np.abs(np.diff(beta, self.order)).sum())
        if kind is RegularizerKind.L1_COEFF:
            return float(np.sum(self.weights * np.abs(self.coefficients(beta))))
        if kind is RegularizerKind.BLOCK_L1:
            c = self.coefficients(beta)
            norms = np.array([np.linalg.norm(c[b]) for b in self.partition.blocks])
            return float(np.dot(self.weights, norms))
        if kind is RegularizerKind.SOBOLEV_KQ:
            return float(
                sum(
                    np.linalg.norm(np.diff(beta, k), ord=self.norm)
                    for k in range(min(self.order, max(beta.size - 1, 0)) + 1)
                )
            )
        if kind is RegularizerKind.L2_SQ:
            v = beta if self.operator is None else self.operator @ beta
            return 0.5 * float(np.dot(v, v))
        return int(np.count_nonzero(np.diff(beta)))

    def analysis(self, p: int) -> LinearOperator:
        """
        The analysis map of coefficient-domain kinds: the basis analysis, or
        the identity without a basis.
        """
        if self.basis is None:
            return aslinearoperator(sparse.identity(p, format="csr"))
        if self.basis.n != p:
            raise InputError("Regularizer basis does not match the dimension.")
        return LinearOperator(
            (p, p),
            matvec=self.basis.analyze,
            rmatvec=self.basis.synthesize,
            dtype=float,
        )


@dataclass(frozen=True)
class MindProblem:
    """
    One constrained estimation problem: minimize ``R(beta)`` subject to the
    multiscale constraint on ``Y - X beta``.
    """

    op: DesignOperator
    obs: Observation
    constraint: MultiscaleConstraint
    reg: Regularizer

    def __post_init__(self):
        if self.obs.n != self.op.n:
            raise InputError("Observation length does not match the design.")
        if self.constraint.probes.n != self.op.n:
            raise InputError("Probes do not act on the data space.")


@dataclass(frozen=True, eq=False)
class SolveReport:
    beta_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    constraint_slack: float
    objective: float
    converged: bool
    dual_gap: Optional[float] = None
    # Rows of (iteration, max(primal_residual, dual_residual)) at each check.
    history: Optional[np.ndarray] = None

    def gap_windows(self, window: int = 100) -> np.ndarray:
        """
        Largest residual surrogate inside each block of ``window`` iterations.
        """
        if self.history is None or not len(self.history):
            return np.zeros(0)
        blocks = (self.history[:, 0] - 1) // window
        return np.array(
            [self.history[blocks == b, 1].max() for b in np.unique(blocks)]
        )


# Ball projections and proximal maps.


def project_ball(v, r: float, norm: str = "l2") -> np.ndarray:
    """
    Euclidean projection onto ``{x : ||x|| <= r}``.

    :param v: The point.
    :param float r: Radius, nonnegative.
    :param str norm: ``"l2"``, ``"linf"`` or ``"l1"``.
    :rtype: numpy.ndarray
    """
    if r < 0:
        raise InputError("Radius must be nonnegative.")
    v = np.asarray(v, dtype=float)
    if norm == "linf":
        return np.clip(v, -r, r)
    if norm == "l2":
        length = np.linalg.norm(v)
        return v.copy() if length <= r else v * (r / length)
    if norm == "l1":
        return _project_l1(v, r)
    raise InputError("Unknown norm {0!r}.".format(norm))


def _project_l1(v: np.ndarray, r: float) -> np.ndarray:
    a = np.abs(v)
    if a.sum() <= r:
        return v.copy()
    if r == 0:
        return np.zeros_like(v)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - r)[0][-1]
    shift = (css[rho] - r) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - shift, 0.0)


def project_groups(v: np.ndarray, sizes: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """
    Projects every consecutive group of ``v`` onto its Euclidean ball.
    """
    if (sizes == 1).all():
        return np.clip(v, -radii, radii)
    offsets = np.concatenate([[0], np.cumsum(sizes)])[:-1]
    norms = np.sqrt(np.add.reduceat(v * v, offsets))
    over = norms > radii
    factor = np.where(over, radii / np.where(over, norms, 1.0), 1.0)
    return v * np.repeat(factor, sizes)


def group_soft(x: np.ndarray, partition: BlockPartition, thresholds) -> np.ndarray:
    """
    Block soft thresholding of the partitioned entries of ``x``; entries
    outside the partition are left untouched.
    """
    out = np.array(x, dtype=float)
    order = partition.order
    c = out[order]
    offsets = np.concatenate([[0], np.cumsum(partition.sizes)])[:-1]
    norms = np.sqrt(np.add.reduceat(c * c, offsets))
    keep = norms > thresholds
    factor = np.where(keep, 1.0 - thresholds / np.where(keep, norms, 1.0), 0.0)
    out[order] = c * np.repeat(factor, partition.sizes)
    return out


def prox_tv_1d(v, gamma: float) -> np.ndarray:
    """
    Exact minimizer of ``1/2 ||v - u||^2 + gamma sum |u[i+1] - u[i]|``.

    Linearized taut-string algorithm; linear time in practice.
    """
    y = np.asarray(v, dtype=float)
    if y.ndim != 1:
        raise InputError("prox_tv_1d expects a vector.")
    if gamma < 0:
        raise InputError("gamma must be nonnegative.")
    x = y.copy()
    if gamma == 0 or y.size < 2:
        return x
    lam = float(gamma)
    n = y.size
    i = 0
    mn_height = mx_height = 0.0
    mn, mx = y[0] - lam, y[0] + lam
    last_break = -1
    mn_break = mx_break = 0
    while i < n:
        while i < n - 1:
            mn_height += mn - y[i]
            if lam < mn_height:
                i = mn_break + 1
                x[last_break + 1 : mn_break + 1] = mn
                last_break = mn_break
                mn = y[i]
                mx = 2 * lam + mn
                mx_height, mn_height = lam, -lam
                mn_break = mx_break = i
                i += 1
                continue
            mx_height += mx - y[i]
            if -lam > mx_height:
                i = mx_break + 1
                x[last_break + 1 : mx_break + 1] = mx
                last_break = mx_break
                mx = y[i]
                mn = mx - 2 * lam
                mn_height, mx_height = lam, -lam
                mn_break = mx_break = i
                i += 1
                continue
            if mx_height > lam:
                mx += (lam - mx_height) / (i - last_break)
                mx_height = lam
                mx_break = i
            if mn_height <= -lam:
                mn += (-lam - mn_height) / (i - last_break)
                mn_height = -lam
                mn_break = i
            i += 1
        mn_height += mn - y[i]
        if mn_height > 0:
            i = mn_break + 1
            x[last_break + 1 : mn_break + 1] = mn
            last_break = mn_break
            mn = y[i]
            mx = 2 * lam + mn
            mx_height = mn_height = -lam
            mn_break = mx_break = i
            continue
        mx_height += mx - y[i]
        if mx_height < 0:
            i = mx_break + 1
            x[last_break + 1 : mx_break + 1] = mx
            last_break = mx_break
            mx = y[i]
            mn = mx - 2 * lam
            mn_height = mx_height = lam
            mn_break = mx_break = i
            continue
        if mn_height <= 0:
            mn += -mn_height / (i - last_break)
        i += 1
    x[last_break + 1 :] = mn
    return x


def conjugate_block_l1(mu, partition: BlockPartition, weights) -> float:
    """
    Fenchel conjugate of ``beta -> sum_a w_a ||B_a beta||``: 0 on the set
    ``max_a ||B_a mu|| / w_a <= 1`` and ``inf`` elsewhere.
    """
    mu = np.asarray(mu, dtype=float)
    weights = np.broadcast_to(
        np.asarray(weights, dtype=float), (len(partition.blocks),)
    )
    norms = np.array([np.linalg.norm(mu[b]) for b in partition.blocks])
    if (norms / weights).max() <= 1.0 + 1e-12:
        return 0.0
    return math.inf


# The primal-dual engine.


@dataclass
class _DualTerm:
    """
    A term ``h(L beta)`` of the objective, represented by ``L`` and the
    proximal map ``(u, s) -> prox_{s h*}(u)`` of the conjugate.
    """

    op: LinearOperator
    prox_conj: Callable[[np.ndarray, float], np.ndarray]
    norm: Optional[float] = None


def _prox_box(bound):
    return lambda u, s: np.clip(u, -bound, bound)


def _prox_quadratic(scale: float):
    # h = scale/2 ||.||^2, so h* = ||.||^2 / (2 scale).
    return lambda u, s: u / (1.0 + s / scale)


def _prox_fidelity(y: np.ndarray):
    # h(z) = 1/2 ||z - y||^2.
    return lambda u, s: (u - s * y) / (1.0 + s)


def _prox_dual_norm(norm: float, scale: float):
    # h = scale ||.||_norm; h* is the indicator of the dual-norm ball.
    if norm == 1.0:
        return _prox_box(scale)
    dual = "l2" if norm == 2.0 else "l1"
    return lambda u, s: project_ball(u, scale, dual)


def _prox_indicator(project: Callable[[np.ndarray], np.ndarray]):
    # Moreau: prox_{s h*}(u) = u - s proj(u / s) for h the indicator of a set.
    return lambda u, s: u - s * project(u / s)


def _regularizer_terms(reg: Regularizer, p: int, scale: float = 1.0) -> List[_DualTerm]:
    """
    Splits ``scale * R`` into terms ``h(L beta)``.
    """
    kind = reg.kind
    if kind is RegularizerKind.SQ_DIFF:
        d = aslinearoperator(difference_matrix(p, reg.order))
        return [_DualTerm(d, _prox_quadratic(scale))]
    if kind is RegularizerKind.TV:
        d = aslinearoperator(difference_matrix(p, reg.order))
        return [_DualTerm(d, _prox_box(scale))]
    if kind is RegularizerKind.L1_COEFF:
        bound = scale * np.broadcast_to(reg.weights, (p,))
        return [_DualTerm(reg.analysis(p), _prox_box(bound), 1.0)]
    if kind is RegularizerKind.BLOCK_L1:
        partition = reg.partition
        if partition.size != p:
            raise InputError("Partition size does not match the dimension.")
        analysis = reg.analysis(p)
        order = partition.order

        def forward(beta):
            return analysis.matvec(beta)[order]

        def adjoint(z):
            c = np.zeros(p)
            c[order] = z
            return analysis.rmatvec(c)

        op = LinearOperator((order.size, p), matvec=forward, rmatvec=adjoint)
        radii = scale * reg.weights
        sizes = partition.sizes
        return [_DualTerm(op, lambda u, s: project_groups(u, sizes, radii), 1.0)]
    if kind is RegularizerKind.SOBOLEV_KQ:
        return [
            _DualTerm(
                aslinearoperator(difference_matrix(p, k)),
                _prox_dual_norm(reg.norm, scale),
                1.0 if k == 0 else None,
            )
            for k in range(min(reg.order, p - 1) + 1)
        ]
    if kind is RegularizerKind.L2_SQ:
        if reg.operator is None:
            identity = aslinearoperator(sparse.identity(p))
            return [_DualTerm(identity, _prox_quadratic(scale), 1.0)]
        if reg.operator.shape[1] != p:
            raise InputError("Regularizer operator does not match the dimension.")
        return [_DualTerm(aslinearoperator(reg.operator), _prox_quadratic(scale))]
    raise UnsupportedError("{0} is not convex.".format(kind.value))


def _power_norm(matvec, rmatvec, p: int, iterations: int, seed: int = 0) -> float:
    x = np.random.default_rng(seed).standard_normal(p)
    x /= np.linalg.norm(x)
    value = 0.0
    for _ in range(iterations):
        z = rmatvec(matvec(x))
        value = float(np.linalg.norm(z))
        if value == 0.0:
            return 0.0
        x = z / value
    return math.sqrt(value)


def _primal_prox(quadratic: float = 0.0, center=None, project=None):
    """
    Proximal map of ``quadratic/2 ||beta - center||^2 + indicator(C)``.
    """

    def prox(v, t):
        if quadratic:
            c = 0.0 if center is None else center
            v = (v + t * quadratic * c) / (1.0 + t * quadratic)
        return v if project is None else project(v)

    return prox


def _chambolle_pock(
    terms: List[_DualTerm],
    prox_g,
    p: int,
    objective: Callable[[np.ndarray], float],
    slack: Optional[Callable[[np.ndarray], float]] = None,
    slack_tol: float = 0.0,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    Minimizes ``G(beta) + sum_i h_i(L_i beta)``.

    Every ``L_i`` is rescaled to unit norm first; the step sizes satisfy
    ``tau sigma ||K||^2 < 1`` for the stacked rescaled operator ``K``.
    """
    if max_iter is None:
        max_iter = settings.get("MINDKIT_PDHG_MAX_ITER")
    if tol is None:
        tol = settings.get("MINDKIT_PDHG_TOL")
    power_iter = settings.get("MINDKIT_PDHG_POWER_ITER")
    theta = settings.get("MINDKIT_PDHG_RELAXATION")
    check_every = settings.get("MINDKIT_PDHG_CHECK_EVERY")

    ops, proxes = [], []
    for term in terms:
        norm = term.norm
        if norm is None:
            norm = _power_norm(term.op.matvec, term.op.rmatvec, p, power_iter)
        if norm == 0.0:
            continue
        c = 1.0 / norm
        ops.append((term.op, c))
        proxes.append(
            lambda u, s, f=term.prox_conj, c=c: f(c * u, s * c * c) / c
        )

    def measure(x):
        return 0.0 if slack is None else slack(x)

    if not ops:
        # Proximal point iteration on G alone.
        x = np.zeros(p)
        for it in range(1, max_iter + 1):
            x_new = prox_g(x, 1.0)
            step = float(np.linalg.norm(x_new - x))
            x = x_new
            if step <= tol * max(1.0, float(np.linalg.norm(x))):
                break
        return SolveReport(x, it, step, 0.0, measure(x), objective(x), True)

    def apply_k(x):
        return [c * op.matvec(x) for op, c in ops]

    def apply_kt(ys):
        return sum(c * op.rmatvec(y) for (op, c), y in zip(ops, ys))

    norm_k = _power_norm(
        lambda x: np.concatenate(apply_k(x)),
        lambda z: apply_kt(np.split(z, np.cumsum([op.shape[0] for op, _ in ops])[:-1])),
        p,
        power_iter,
    )
    base = settings.get("MINDKIT_PDHG_STEP") / (
        settings.get("MINDKIT_PDHG_SAFETY") * norm_k
    )
    ratio = settings.get("MINDKIT_PDHG_STEP_RATIO")
    tau, sigma = base * ratio, base / ratio

    x = np.zeros(p)
    x_bar = x.copy()
    ys = [np.zeros(op.shape[0]) for op, _ in ops]
    best, best_objective = None, math.inf
    dual_history: List[float] = []
    history: List[Tuple[int, float]] = []
    primal_res = dual_res = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x_old, ys_old = x, ys
        kx_bar = apply_k(x_bar)
        ys = [prox(y + sigma * kx, sigma) for prox, y, kx in zip(proxes, ys, kx_bar)]
        kty = apply_kt(ys)
        x = prox_g(x - tau * kty, tau)
        x_bar = x + theta * (x - x_old)

        if it % check_every and it != max_iter:
            continue
        dx = x_old - x
        dys = [a - b for a, b in zip(ys_old, ys)]
        kdx = apply_k(dx)
        kx = apply_k(x)
        primal_res = float(np.linalg.norm(dx / tau - apply_kt(dys))) / max(
            1.0, float(np.linalg.norm(kty)), float(np.linalg.norm(x)) / tau
        )
        dual_res = math.sqrt(
            sum(float(np.sum((d / sigma - k) ** 2)) for d, k in zip(dys, kdx))
        ) / max(
            1.0,
            math.sqrt(sum(float(np.dot(k, k)) for k in kx)),
            math.sqrt(sum(float(np.dot(y, y)) for y in ys)) / sigma,
        )
        history.append((it, max(primal_res, dual_res)))
        s = measure(x)
        value = objective(x)
        dual_history.append(math.sqrt(sum(float(np.dot(y, y)) for y in ys)))
        if s <= slack_tol and value < best_objective:
            best, best_objective = x.copy(), value
        if it % (100 * check_every) == 0:
            logger.debug(
                "pdhg it=%d obj=%.8g slack=%.3g res=(%.3g, %.3g)",
                it,
                value,
                s,
                primal_res,
                dual_res,
            )
        if primal_res <= tol and dual_res <= tol and s <= slack_tol:
            converged = True
            break

    s = measure(x)
    value = objective(x)
    if s > slack_tol or (
        best is not None and best_objective < value - tol * max(1.0, abs(value))
    ):
        if best is None:
            half = dual_history[len(dual_history) // 2]
            if dual_history[-1] > 1.5 * max(half, 1e-12):
                raise InfeasibleError(
                    "No feasible point found; the dual iterates diverge.", slack=s
                )
            logger.warning(
                "pdhg stopped after %d iterations with slack %.3g", it, s
            )
        else:
            x = best
            s, value = measure(x), best_objective
    if not converged:
        logger.warning(
            "pdhg did not converge in %d iterations (res=%.3g, %.3g)",
            it,
            primal_res,
            dual_res,
        )
    logger.info("pdhg finished after %d iterations, objective %.8g", it, value)
    return SolveReport(
        x,
        it,
        primal_res,
        dual_res,
        s,
        value,
        converged,
        history=np.array(history, dtype=float).reshape(-1, 2),
    )


def _as_design(X: Design) -> DesignOperator:
    if isinstance(X, DesignOperator):
        return X
    return DesignOperator.dense(X)


def _design_operator(op: DesignOperator) -> LinearOperator:
    return LinearOperator(
        (op.n, op.p), matvec=op.apply, rmatvec=op.apply_adjoint, dtype=float
    )


def _orthogonal_projection(problem: MindProblem):
    """
    Exact projection onto the constraint set when ``X = I`` and the probes
    form an orthogonal map.
    """
    probes = problem.constraint.probes
    if not (problem.op.is_identity and probes.orthogonal and probes.m == probes.n):
        return None
    y = problem.obs.y
    radii = problem.constraint.radii

    def project(v):
        z = probes.forward(y - v)
        return y - probes.adjoint(project_groups(z, probes.sizes, radii))

    return project


def pdhg_solve(
    problem: MindProblem,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    Solves ``min R(beta)`` subject to the multiscale constraint.

    The regularizer is dualized through its analysis map and every probe
    constraint becomes a dual ball term. When ``X = I`` and the probes form
    an orthogonal map, the constraint is enforced exactly in the primal step.

    :param MindProblem problem: The program.
    :param int max_iter: Iteration cap, defaults to ``MINDKIT_PDHG_MAX_ITER``.
    :param float tol: Residual and slack tolerance, defaults to
        ``MINDKIT_PDHG_TOL``.
    :rtype: SolveReport
    :raises UnsupportedError: For a non-convex regularizer.
    :raises InfeasibleError: When the constraint set is empty.
    """
    if tol is None:
        tol = settings.get("MINDKIT_PDHG_TOL")
    reg, op, constraint = problem.reg, problem.op, problem.constraint
    if not reg.convex:
        raise UnsupportedError("pdhg_solve needs a convex regularizer.")
    radii = constraint.radii
    if (radii < 0).any():
        raise InfeasibleError(
            "Threshold below a scale penalty; the constraint set is empty.",
            slack=float(-radii.min()),
        )
    probes = constraint.probes
    y = problem.obs.y
    p = op.p

    project = _orthogonal_projection(problem)
    quadratic = reg.kind is RegularizerKind.L2_SQ and reg.operator is None
    terms = [] if quadratic else _regularizer_terms(reg, p)
    prox_g = _primal_prox(1.0 if quadratic else 0.0, None, project)

    if project is None:
        center = probes.forward(y)
        sizes = probes.sizes

        def into_balls(z):
            return center + project_groups(z - center, sizes, radii)

        design = _design_operator(op)
        composed = LinearOperator(
            (probes.m, p),
            matvec=lambda b: probes.forward(design.matvec(b)),
            rmatvec=lambda z: design.rmatvec(probes.adjoint(z)),
            dtype=float,
        )
        terms.append(_DualTerm(composed, _prox_indicator(into_balls)))

    def slack(beta):
        return multiscale_statistic(y - op.apply(beta), probes) - constraint.q

    return _chambolle_pock(
        terms,
        prox_g,
        p,
        reg,
        slack,
        tol * max(1.0, abs(constraint.q)),
        max_iter,
        tol,
    )


# Accelerated proximal gradient.


def _fista(
    op: DesignOperator,
    y: np.ndarray,
    prox: Callable[[np.ndarray, float], np.ndarray],
    penalty: Callable[[np.ndarray], float],
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> np.ndarray:
    """
    FISTA with gradient-based adaptive restart on ``1/2 ||y - X b||^2 + P(b)``.
    """
    if max_iter is None:
        max_iter = settings.get("MINDKIT_FISTA_MAX_ITER")
    if tol is None:
        tol = settings.get("MINDKIT_FISTA_TOL")
    lipschitz = op.norm() ** 2
    if lipschitz == 0.0:
        return np.zeros(op.p)
    step = 1.0 / lipschitz

    def value(b):
        r = y - op.apply(b)
        return 0.5 * float(np.dot(r, r)) + penalty(b)

    x = np.zeros(op.p)
    z = x.copy()
    t = 1.0
    current = value(x)
    it = 0
    for it in range(1, max_iter + 1):
        grad = op.apply_adjoint(op.apply(z) - y)
        x_new = prox(z - step * grad, step)
        if np.dot(z - x_new, x_new - x) > 0:
            # Momentum points uphill; restart from the last iterate.
            t = 1.0
            z = x.copy()
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        change = float(np.linalg.norm(x_new - x))
        x, t = x_new, t_new
        new_value = value(x)
        decrease = abs(current - new_value)
        current = new_value
        if decrease <= tol * max(1.0, abs(current)) and change <= math.sqrt(tol) * max(
            1.0, float(np.linalg.norm(x))
        ):
            break
    logger.debug("fista finished after %d iterations, objective %.10g", it, current)
    return x


def group_lasso_solve(
    X: Design,
    y,
    partition: BlockPartition,
    weights,
    gamma: float,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> np.ndarray:
    """
    Minimizes ``1/2 ||Y - X beta||^2 + gamma sum_a w_a ||B_a beta||``.

    Entries outside the partition are not penalized.

    :param X: Design operator or dense matrix.
    :param y: Data vector.
    :param BlockPartition partition: Disjoint groups of parameter indices.
    :param weights: Positive group weights.
    :param float gamma: Nonnegative penalty level.
    :rtype: numpy.ndarray
    """
    op = _as_design(X)
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n,):
        raise InputError("Data length does not match the design.")
    if partition.size != op.p:
        raise InputError("Partition size does not match the design.")
    if gamma < 0:
        raise InputError("gamma must be nonnegative.")
    weights = np.broadcast_to(
        np.asarray(weights, dtype=float), (len(partition.blocks),)
    )
    if not (weights > 0).all():
        raise InputError("Group weights must be strictly positive.")
    levels = gamma * weights

    def penalty(b):
        return float(
            sum(w * np.linalg.norm(b[g]) for w, g in zip(levels, partition.blocks))
        )

    if op.is_identity:
        return group_soft(y, partition, levels)
    return _fista(
        op, y, lambda v, s: group_soft(v, partition, s * levels), penalty, max_iter, tol
    )


def lasso_solve(X: Design, y, gamma: float, **kwargs) -> np.ndarray:
    """
    ``1/2 ||Y - X beta||^2 + gamma ||beta||_1``.
    """
    op = _as_design(X)
    singletons = BlockPartition.singletons(op.p)
    return group_lasso_solve(op, y, singletons, 1.0, gamma, **kwargs)


# Penalized and R-constrained programs.


def _solve_normal(op: DesignOperator, y: np.ndarray, penalty_matrix) -> np.ndarray:
    gram = op.to_matrix().T @ op.to_matrix() + penalty_matrix
    rhs = op.apply_adjoint(y)
    try:
        return linalg.solve(gram, rhs, assume_a="sym")
    except linalg.LinAlgError:
        return linalg.lstsq(gram, rhs)[0]


def _coefficient_design(op: DesignOperator, basis: OrthonormalBasis) -> DesignOperator:
    return DesignOperator.dense(op.to_matrix() @ basis.vectors().T)


def penalized_solve(
    op: DesignOperator,
    y,
    reg: Regularizer,
    gamma: float,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> np.ndarray:
    """
    Minimizes ``1/2 ||Y - X beta||^2 + gamma R(beta)``.

    Uses a closed form or direct solver where one exists (ridge and spline
    normal equations, taut string, orthonormal shrinkage, group-lasso FISTA)
    and the primal-dual engine otherwise.
    """
    if not reg.convex:
        raise UnsupportedError("penalized_solve needs a convex regularizer.")
    if gamma < 0:
        raise InputError("gamma must be nonnegative.")
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n,):
        raise InputError("Data length does not match the design.")
    p, kind = op.p, reg.kind

    if kind is RegularizerKind.L2_SQ:
        if reg.operator is None and op.is_identity:
            return y / (1.0 + gamma)
        a = np.eye(p) if reg.operator is None else reg.operator
        return _solve_normal(op, y, gamma * (a.T @ a))
    if kind is RegularizerKind.SQ_DIFF:
        d = difference_matrix(p, reg.order)
        if op.is_identity:
            system = sparse.identity(p, format="csc") + gamma * (d.T @ d).tocsc()
            return np.asarray(spsolve(system, y))
        return _solve_normal(op, y, gamma * (d.T @ d).toarray())
    if kind is RegularizerKind.TV and reg.order == 1 and op.is_identity:
        return prox_tv_1d(y, gamma)
    if kind is RegularizerKind.L1_COEFF:
        basis = reg.basis or CanonicalBasis(p)
        levels = gamma * np.broadcast_to(reg.weights, (p,))
        if op.is_identity:
            return basis.synthesize(weighted_soft(basis.analyze(y), levels))
        design = op if reg.basis is None else _coefficient_design(op, basis)
        coeffs = _fista(
            design,
            y,
            lambda v, s: weighted_soft(v, s * levels),
            lambda c: float(np.sum(levels * np.abs(c))),
            max_iter,
            tol,
        )
        return basis.synthesize(coeffs)
    if kind is RegularizerKind.BLOCK_L1:
        basis = reg.basis or CanonicalBasis(p)
        if op.is_identity:
            levels = gamma * reg.weights
            return basis.synthesize(group_soft(basis.analyze(y), reg.partition, levels))
        design = op if reg.basis is None else _coefficient_design(op, basis)
        coeffs = group_lasso_solve(
            design, y, reg.partition, reg.weights, gamma, max_iter, tol
        )
        return basis.synthesize(coeffs)

    terms = _regularizer_terms(reg, p, gamma)
    if op.is_identity:
        prox_g = _primal_prox(1.0, y)
    else:
        prox_g = _primal_prox()
        terms.append(_DualTerm(_design_operator(op), _prox_fidelity(y)))

    def objective(beta):
        r = y - op.apply(beta)
        return 0.5 * float(np.dot(r, r)) + gamma * reg(beta)

    report = _chambolle_pock(terms, prox_g, p, objective, None, 0.0, max_iter, tol)
    return report.beta_hat


def _sublevel_projection(reg: Regularizer, c: float, p: int):
    """
    Analysis map ``L`` and projection onto ``{z : h(z) <= c}`` with
    ``R = h(L .)``.
    """
    kind = reg.kind
    if kind is RegularizerKind.SQ_DIFF:
        d = aslinearoperator(difference_matrix(p, reg.order))
        return d, lambda z: project_ball(z, math.sqrt(2.0 * c), "l2"), None
    if kind is RegularizerKind.TV:
        d = aslinearoperator(difference_matrix(p, reg.order))
        return d, lambda z: project_ball(z, c, "l1"), None
    if kind is RegularizerKind.L1_COEFF:
        w = np.unique(np.broadcast_to(reg.weights, (p,)))
        if w.size != 1 or w[0] <= 0:
            raise UnsupportedError("R-constrained l1_coeff needs one positive weight.")
        return reg.analysis(p), lambda z: project_ball(z, c / w[0], "l1"), 1.0
    raise UnsupportedError(
        "R-constrained solve is not available for {0}.".format(kind.value)
    )


def fidelity_constrained_solve(
    op: DesignOperator,
    y,
    reg: Regularizer,
    c: float,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    Minimizes ``1/2 ||Y - X beta||^2`` subject to ``R(beta) <= c``.

    Supported for ``l2_sq`` (without operator), ``sq_diff``, ``tv`` and
    ``l1_coeff`` with a single weight. The report's slack is ``R - c``.
    """
    if tol is None:
        tol = settings.get("MINDKIT_PDHG_TOL")
    if c < 0:
        raise InfeasibleError("R(beta) <= c is empty for c < 0.", slack=-c)
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n,):
        raise InputError("Data length does not match the design.")
    p = op.p

    terms: List[_DualTerm] = []
    project = None
    if reg.kind is RegularizerKind.L2_SQ and reg.operator is None:
        radius = math.sqrt(2.0 * c)

        def project(v):
            return project_ball(v, radius, "l2")

    else:
        analysis, into_set, norm = _sublevel_projection(reg, c, p)
        terms.append(_DualTerm(analysis, _prox_indicator(into_set), norm))

    if op.is_identity:
        prox_g = _primal_prox(1.0, y, project)
    else:
        prox_g = _primal_prox(0.0, None, project)
        terms.append(_DualTerm(_design_operator(op), _prox_fidelity(y)))

    def objective(beta):
        r = y - op.apply(beta)
        return 0.5 * float(np.dot(r, r))

    return _chambolle_pock(
        terms,
        prox_g,
        p,
        objective,
        lambda beta: reg(beta) - c,
        tol * max(1.0, c),
        max_iter,
        tol,
    )


# Lagrange multiplier calibration.


@dataclass(frozen=True, eq=False)
class DiscrepancyResult:
    """
    ``gamma`` is 0 for degenerate cases, where no positive multiplier
    matches the target residual.
    """

    gamma: float
    beta_hat: np.ndarray
    residual: float
    degenerate: bool
    evaluations: int = 0


def minimizer_subspace(reg: Regularizer, p: int) -> np.ndarray:
    """
    Basis (as columns) of the set where ``R`` attains its minimum 0.
    """
    kind = reg.kind
    if kind in (RegularizerKind.SQ_DIFF, RegularizerKind.TV):
        grid = np.arange(p) / max(p - 1, 1)
        return np.vander(grid, reg.order, increasing=True)
    if kind is RegularizerKind.L2_SQ and reg.operator is not None:
        return linalg.null_space(reg.operator)
    if kind is RegularizerKind.L1_COEFF:
        w = np.broadcast_to(reg.weights, (p,))
        free = np.eye(p)[:, w == 0]
        return free if reg.basis is None else reg.basis.synthesize(free.T).T
    return np.zeros((p, 0))


def discrepancy_calibrate(
    op: DesignOperator,
    obs: Observation,
    reg: Regularizer,
    q: float,
    tol: float = 1e-8,
) -> DiscrepancyResult:
    """
    Finds ``gamma`` with ``||Y - X beta(gamma)|| = q`` where ``beta(gamma)``
    minimizes ``1/2 ||Y - X beta||^2 + gamma R(beta)``.

    The search runs on ``log gamma`` over the ``MINDKIT_GAMMA_MIN`` /
    ``MINDKIT_GAMMA_MAX`` bracket. If a minimizer of ``R`` already meets
    ``||Y - X beta|| <= q``, or no ``beta`` gets the residual below ``q``,
    the result is degenerate with ``gamma = 0``.
    """
    if not reg.convex:
        raise UnsupportedError("Discrepancy calibration needs a convex regularizer.")
    y = obs.y
    p = op.p

    basis = minimizer_subspace(reg, p)
    if basis.shape[1]:
        design = op.to_matrix() @ basis
        theta = linalg.lstsq(design, y)[0]
        flat = basis @ theta
    else:
        flat = np.zeros(p)
    flat_residual = float(np.linalg.norm(y - op.apply(flat)))
    if flat_residual <= q:
        logger.info("R-minimizer is feasible (residual %.6g <= q)", flat_residual)
        return DiscrepancyResult(0.0, flat, flat_residual, True)

    lo = math.log(settings.get("MINDKIT_GAMMA_MIN"))
    hi = math.log(settings.get("MINDKIT_GAMMA_MAX"))
    evaluations = 0

    def gap(log_gamma: float) -> float:
        nonlocal evaluations
        evaluations += 1
        beta = penalized_solve(op, y, reg, math.exp(log_gamma))
        return float(np.linalg.norm(y - op.apply(beta))) - q

    if gap(lo) >= 0:
        least = linalg.lstsq(op.to_matrix(), y)[0]
        residual = float(np.linalg.norm(y - op.apply(least)))
        logger.warning("Residual cannot reach q=%.6g; smallest is %.6g", q, residual)
        return DiscrepancyResult(0.0, least, residual, True, evaluations)
    if gap(hi) <= 0:
        raise InputError("q is not reached within the gamma bracket.")
    log_gamma = optimize.brentq(gap, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=500)
    gamma = math.exp(log_gamma)
    beta = penalized_solve(op, y, reg, gamma)
    residual = float(np.linalg.norm(y - op.apply(beta)))
    if abs(residual - q) > tol:
        logger.warning("Discrepancy residual %.10g misses q=%.10g", residual, q)
    logger.info("Discrepancy principle: gamma=%.6g after %d solves", gamma, evaluations)
    return DiscrepancyResult(gamma, beta, residual, False, evaluations)


# Constrained programs that have names of their own.


def dantzig_selector(
    op: DesignOperator,
    obs: Observation,
    q: float,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    ``min ||beta||_1`` subject to ``||X^T (Y - X beta)||_inf <= q``.
    """
    probes = basis_probes(CanonicalBasis(op.p)).through_adjoint(op)
    problem = MindProblem(
        op, obs, MultiscaleConstraint(probes, q), Regularizer.l1_coeff()
    )
    return pdhg_solve(problem, max_iter, tol)


def dual_group_lasso_solve(
    X: Design,
    y,
    partition: BlockPartition,
    weights,
    gamma: float,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolveReport:
    """
    ``min 1/2 ||X beta||^2`` subject to
    ``max_a ||B_a X^T (Y - X beta)|| / w_a <= gamma``.
    """
    op = _as_design(X)
    probes = block_probes(CanonicalBasis(op.p), partition, weights).through_adjoint(op)
    problem = MindProblem(
        op,
        Observation(np.asarray(y, dtype=float), 0.0),
        MultiscaleConstraint(probes, gamma),
        Regularizer.l2_sq(op.to_matrix()),
    )
    return pdhg_solve(problem, max_iter, tol)


@dataclass(frozen=True, eq=False)
class DualEquivalenceReport:
    """
    ``prediction_gap`` is ``||X b1 - X b2||`` between the penalized and the
    constrained solutions. ``constraint_slack`` is the constraint value of
    the penalized solution minus ``gamma``.
    """

    prediction_gap: float
    constraint_slack: float
    penalized: np.ndarray
    constrained: np.ndarray


def verify_dual_equivalence(
    X: Design,
    y,
    partition: BlockPartition,
    weights,
    gamma: float,
    tol: Optional[float] = None,
) -> DualEquivalenceReport:
    """
    Solves the group lasso and its constrained dual reformulation and
    compares their predictions.
    """
    op = _as_design(X)
    y = np.asarray(y, dtype=float)
    first = group_lasso_solve(op, y, partition, weights, gamma)
    try:
        second = dual_group_lasso_solve(op, y, partition, weights, gamma, tol=tol)
    except MindError:
        logger.error("Constrained reformulation failed for gamma=%g", gamma)
        raise
    weights = np.broadcast_to(
        np.asarray(weights, dtype=float), (len(partition.blocks),)
    )
    correlation = op.apply_adjoint(y - op.apply(first))
    scaled = np.array(
        [np.linalg.norm(correlation[b]) for b in partition.blocks]
    ) / weights
    gap = float(np.linalg.norm(op.apply(first) - op.apply(second.beta_hat)))
    slack = float(scaled.max()) - gamma
    return DualEquivalenceReport(gap, slack, first, second.beta_hat)
