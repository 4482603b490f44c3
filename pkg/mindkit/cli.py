"""
Command-line interface: ``mindkit <simulate|estimate|segment|quantile|verify>``.

Data goes to ``--output`` (or stdout) as CSV or JSON; the JSON report goes to
``--report``, or to stdout when the data went to a file. Logs go to stderr.

Exit codes: 0 on success, 1 on solver or verification failure, 2 on usage
errors and invalid input.
"""
import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Union

import numpy as np

from mindkit import __version__
from mindkit import settings
from mindkit.changepoint import Segmentation
from mindkit.changepoint import bic_penalty
from mindkit.changepoint import jump_penalized_ls
from mindkit.changepoint import mcps_solve
from mindkit.dictionaries import BlockPartition
from mindkit.dictionaries import CanonicalBasis
from mindkit.dictionaries import HaarBasis
from mindkit.dictionaries import IntervalSystem
from mindkit.dictionaries import ProbeSystem
from mindkit.dictionaries import basis_probes
from mindkit.dictionaries import block_probes
from mindkit.dictionaries import default_scale_penalties
from mindkit.dictionaries import identity_probe
from mindkit.dictionaries import interval_probes
from mindkit.exceptions import InfeasibleError
from mindkit.exceptions import InputError
from mindkit.exceptions import MindError
from mindkit.model import DesignOperator
from mindkit.model import Observation
from mindkit.model import simulate
from mindkit.multiscale import MultiscaleConstraint
from mindkit.multiscale import block_universal_thresholds
from mindkit.multiscale import calibrate
from mindkit.multiscale import estimate_sigma
from mindkit.multiscale import gumbel_threshold
from mindkit.multiscale import is_feasible
from mindkit.multiscale import monte_carlo_quantile
from mindkit.multiscale import segmentation_statistic
from mindkit.multiscale import universal_threshold
from mindkit.signals import make_signal
from mindkit.signals import signal_names
from mindkit.solvers import MindProblem
from mindkit.solvers import Regularizer
from mindkit.solvers import SolveReport
from mindkit.solvers import dantzig_selector
from mindkit.solvers import group_lasso_solve
from mindkit.solvers import pdhg_solve
from mindkit.thresholding import GARROTE
from mindkit.thresholding import SOFT
from mindkit.thresholding import ShrinkageRule
from mindkit.thresholding import Theta
from mindkit.thresholding import block_threshold
from mindkit.thresholding import wavelet_threshold
from mindkit.utils import ReportEncoder
from mindkit.utils import read_columns
from mindkit.utils import read_matrix
from mindkit.utils import read_vector
from mindkit.utils import write_columns
from mindkit.verify import SUITE_ALIASES
from mindkit.verify import SUITES
from mindkit.verify import run_suite


logger = logging.getLogger(__name__)

ESTIMATE_METHODS = (
    "soft",
    "hard",
    "garrote",
    "block-soft",
    "block-js",
    "tv",
    "hybrid-tv-wavelet",
    "dantzig",
    "nemirovskii",
    "group-lasso",
)
SEGMENT_METHODS = ("mcps", "potts")
QUANTILE_MODES = ("mc", "gumbel", "universal")
QUANTILE_PROBES = ("basis", "identity", "blocks", "intervals")

SigmaArg = Union[float, str]


@dataclass
class RunConfig:
    """
    Fully resolved settings of one command; embedded in every report.
    """

    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    report: Optional[str] = None
    method: Optional[str] = None
    sigma: Optional[SigmaArg] = None
    alpha: Optional[float] = None
    q: Optional[float] = None
    seed: int = 0
    intervals: Optional[str] = None
    reps: Optional[int] = None
    format: str = "csv"
    workers: int = 1
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise InputError("--alpha must lie in (0, 1).")
        if self.alpha is not None and self.q is not None:
            raise InputError("--alpha and --q are mutually exclusive.")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(vars(args))
        values.pop("verbose", None)
        values.pop("handler", None)
        common = {k: values.pop(k) for k in list(values) if k in _COMMON_FIELDS}
        return cls(options=values, **common)

    def option(self, name: str, default=None):
        value = self.options.get(name)
        return default if value is None else value


_COMMON_FIELDS = (
    "command",
    "input",
    "output",
    "report",
    "method",
    "sigma",
    "alpha",
    "q",
    "seed",
    "intervals",
    "reps",
    "format",
    "workers",
)


# Output.


def _dump(payload, stream):
    json.dump(payload, stream, cls=ReportEncoder, indent=2)
    stream.write("\n")


def _write_data(config: RunConfig, columns: Dict[str, np.ndarray]):
    if config.format == "json":
        if config.output is None:
            _dump(columns, sys.stdout)
        else:
            with open(config.output, "w") as f:
                _dump(columns, f)
        return
    write_columns(columns, config.output)


def _emit_report(config: RunConfig, report: Dict[str, Any], has_data: bool = True):
    report = dict(report, config=config, version=__version__)
    if config.report is not None:
        with open(config.report, "w") as f:
            _dump(report, f)
    elif has_data and config.output is None:
        # stdout already carries the data.
        _dump(report, sys.stderr)
    else:
        _dump(report, sys.stdout)


# Shared resolution of data, noise level and thresholds.


def _load_data(config: RunConfig) -> np.ndarray:
    if config.input is None:
        raise InputError("--input is required for {0}.".format(config.command))
    return read_vector(config.input)


def _resolve_sigma(config: RunConfig, y: np.ndarray):
    if config.sigma is None or config.sigma == "estimate":
        sigma = estimate_sigma(y)
        logger.info("Estimated sigma=%.6g from finest-scale differences", sigma)
        return sigma, True
    return float(config.sigma), False


def _coefficient_q(config: RunConfig, n: int, sigma: float):
    if config.q is not None:
        return config.q, "given", None
    if config.alpha is None:
        return universal_threshold(n, sigma), "universal", None
    return gumbel_threshold(n, sigma, config.alpha), "gumbel", None


def _monte_carlo_q(config: RunConfig, probes: ProbeSystem, sigma: float):
    if config.q is not None:
        return config.q, "given", None
    estimate = monte_carlo_quantile(
        probes,
        probes.n,
        sigma,
        config.alpha,
        config.reps,
        config.seed,
        config.workers,
    )
    return estimate.q_alpha, "mc", estimate.stderr


@dataclass(frozen=True, eq=False)
class _Estimate:
    beta_hat: np.ndarray
    op: DesignOperator
    constraint: MultiscaleConstraint
    q_source: str
    q_stderr: Optional[float] = None
    solve: Optional[SolveReport] = None


def _design(config: RunConfig, n: int, required: bool = False) -> DesignOperator:
    path = config.option("design")
    if path is None:
        if required:
            raise InputError("--design is required for {0}.".format(config.method))
        return DesignOperator.identity(n)
    op = DesignOperator.dense(read_matrix(path))
    if op.n != n:
        raise InputError("Design has {0} rows, data has {1}.".format(op.n, n))
    return op


def _block_size(config: RunConfig, p: int) -> int:
    return int(config.option("block_size", max(1, int(math.log(max(p, 2))))))


# Estimation methods.


def _coefficient_method(theta):
    def run(config, y, sigma):
        basis = HaarBasis.for_length(y.size)
        q, source, _ = _coefficient_q(config, y.size, sigma)
        beta = wavelet_threshold(y, basis, ShrinkageRule(theta, q))
        constraint = MultiscaleConstraint(basis_probes(basis), q)
        return _Estimate(beta, DesignOperator.identity(y.size), constraint, source)

    return run


def _block_method(theta):
    def run(config, y, sigma):
        basis = HaarBasis.for_length(y.size)
        block_size = config.option("block_size")
        partition = BlockPartition.haar_levels(basis, block_size)
        stderr = None
        if config.q is None and config.alpha is None:
            weights = block_universal_thresholds(partition.sizes, sigma)
            q, source = 1.0, "block-universal"
        else:
            weights = np.sqrt(partition.sizes)
            probes = block_probes(basis, partition, weights)
            q, source, stderr = _monte_carlo_q(config, probes, sigma)
        beta = block_threshold(y, basis, partition, q * weights, theta)
        constraint = MultiscaleConstraint(block_probes(basis, partition, weights), q)
        return _Estimate(
            beta, DesignOperator.identity(y.size), constraint, source, stderr
        )

    return run


def _pdhg_method(config, y, sigma, op, probes, reg, q_rule) -> _Estimate:
    q, source, stderr = q_rule(config, probes, sigma)
    constraint = MultiscaleConstraint(probes, q)
    report = pdhg_solve(MindProblem(op, Observation(y, sigma), constraint, reg))
    return _Estimate(report.beta_hat, op, constraint, source, stderr, report)


def _tv(config, y, sigma):
    return _pdhg_method(
        config,
        y,
        sigma,
        _design(config, y.size),
        identity_probe(y.size),
        Regularizer.tv(config.option("order", 1)),
        _monte_carlo_q,
    )


def _hybrid(config, y, sigma):
    def coefficient_q(config, probes, sigma):
        return _coefficient_q(config, probes.n, sigma)

    return _pdhg_method(
        config,
        y,
        sigma,
        _design(config, y.size),
        basis_probes(HaarBasis.for_length(y.size)),
        Regularizer.tv(config.option("order", 1)),
        coefficient_q,
    )


def _nemirovskii(config, y, sigma):
    system = IntervalSystem.build(y.size, config.intervals)
    return _pdhg_method(
        config,
        y,
        sigma,
        DesignOperator.identity(y.size),
        interval_probes(system),
        Regularizer.sobolev(config.option("order", 1), config.option("norm", 2.0)),
        _monte_carlo_q,
    )


def _dantzig(config, y, sigma):
    op = _design(config, y.size, required=True)
    probes = basis_probes(CanonicalBasis(op.p)).through_adjoint(op)
    q, source, stderr = _monte_carlo_q(config, probes, sigma)
    report = dantzig_selector(op, Observation(y, sigma), q)
    constraint = MultiscaleConstraint(probes, q)
    return _Estimate(report.beta_hat, op, constraint, source, stderr, report)


def _group_lasso(config, y, sigma):
    op = _design(config, y.size)
    partition = BlockPartition.contiguous(op.p, _block_size(config, op.p))
    weights = np.sqrt(partition.sizes)
    canonical = CanonicalBasis(op.p)
    probes = block_probes(canonical, partition, weights).through_adjoint(op)
    gamma, source, stderr = _monte_carlo_q(config, probes, sigma)
    beta = group_lasso_solve(op, y, partition, weights, gamma)
    constraint = MultiscaleConstraint(probes, gamma)
    return _Estimate(beta, op, constraint, source, stderr)


ESTIMATORS: Dict[str, Callable[[RunConfig, np.ndarray, float], _Estimate]] = {
    "soft": _coefficient_method(SOFT),
    "hard": _coefficient_method(Theta.HARD),
    "garrote": _coefficient_method(GARROTE),
    "block-soft": _block_method(SOFT),
    "block-js": _block_method(GARROTE),
    "tv": _tv,
    "hybrid-tv-wavelet": _hybrid,
    "dantzig": _dantzig,
    "nemirovskii": _nemirovskii,
    "group-lasso": _group_lasso,
}


# Commands.


def cmd_simulate(config: RunConfig) -> int:
    seed, jumps = config.seed, config.option("jumps", 10)
    if config.sigma == "estimate":
        raise InputError("simulate needs a numeric --sigma.")
    sigma = 0.1 if config.sigma is None else float(config.sigma)
    if config.input is not None:
        columns = read_columns(config.input)
        truth = columns["truth"] if "truth" in columns else read_vector(config.input)
        signal = "custom"
    else:
        signal = config.option("signal", "piecewise-smooth")
        truth = make_signal(signal, config.option("n", 1024), seed, jumps)
    n = truth.size
    obs = simulate(DesignOperator.identity(n), truth, sigma, seed)
    _write_data(
        config,
        {"index": np.arange(1, n + 1), "truth": truth, "observation": obs.y},
    )
    _emit_report(
        config,
        {"command": "simulate", "signal": signal, "n": n, "sigma": sigma, "seed": seed},
    )
    return 0


def cmd_estimate(config: RunConfig) -> int:
    y = _load_data(config)
    sigma, estimated = _resolve_sigma(config, y)
    started = time.perf_counter()
    result = ESTIMATORS[config.method](config, y, sigma)
    elapsed = time.perf_counter() - started
    feasible, slack = is_feasible(
        result.beta_hat, Observation(y, sigma), result.op, result.constraint
    )
    solve = result.solve
    _write_data(
        config,
        {"index": np.arange(1, result.beta_hat.size + 1), "estimate": result.beta_hat},
    )
    _emit_report(
        config,
        {
            "command": "estimate",
            "method": config.method,
            "n": int(y.size),
            "sigma": sigma,
            "sigma_estimated": estimated,
            "q": result.constraint.q,
            "q_source": result.q_source,
            "q_stderr": result.q_stderr,
            "constraint_slack": slack,
            "feasible": feasible,
            "iterations": 0 if solve is None else solve.iterations,
            "converged": True if solve is None else solve.converged,
            "objective": None if solve is None else solve.objective,
            "wall_time": elapsed,
        },
    )
    return 0


def _interval_system(config: RunConfig, n: int) -> IntervalSystem:
    system = IntervalSystem.build(n, config.intervals)
    if config.option("penalty", "log") == "log":
        system = default_scale_penalties(n, system)
    return system


def cmd_segment(config: RunConfig) -> int:
    y = _load_data(config)
    n = y.size
    sigma, estimated = _resolve_sigma(config, y)
    started = time.perf_counter()
    details: Dict[str, Any] = {}
    segmentation: Segmentation
    if config.method == "potts":
        gamma = config.option("gamma")
        if gamma is None:
            gamma = bic_penalty(n, sigma)
        segmentation = jump_penalized_ls(y, gamma)
        details["gamma"] = gamma
    else:
        system = _interval_system(config, n)
        q, source, stderr = _monte_carlo_q(config, interval_probes(system), sigma)
        segmentation = mcps_solve(y, system, q)
        details.update(
            q=q,
            q_source=source,
            q_stderr=stderr,
            statistic=segmentation_statistic(y, segmentation, system),
            boxes=segmentation.boxes,
        )
    elapsed = time.perf_counter() - started
    edges = np.array((0,) + segmentation.breakpoints + (n,))
    _write_data(
        config,
        {"start": edges[:-1] + 1, "end": edges[1:], "level": segmentation.levels},
    )
    _emit_report(
        config,
        dict(
            {
                "command": "segment",
                "method": config.method,
                "n": n,
                "sigma": sigma,
                "sigma_estimated": estimated,
                "jumps": segmentation.jumps,
                "breakpoints": segmentation.breakpoints,
                "levels": segmentation.levels,
                "wall_time": elapsed,
            },
            **details,
        ),
    )
    return 0


def _quantile_probes(config: RunConfig, n: int) -> ProbeSystem:
    kind = config.option("probes", "basis")
    if kind == "basis":
        # The statistic has the same law for every orthonormal basis.
        return basis_probes(CanonicalBasis(n))
    if kind == "identity":
        return identity_probe(n)
    if kind == "blocks":
        partition = BlockPartition.contiguous(n, _block_size(config, n))
        return block_probes(CanonicalBasis(n), partition, np.sqrt(partition.sizes))
    return interval_probes(_interval_system(config, n))


def cmd_quantile(config: RunConfig) -> int:
    n = config.option("n", 1024)
    mode = config.option("mode", "mc")
    if config.sigma == "estimate":
        raise InputError("quantile needs a numeric --sigma.")
    sigma = 1.0 if config.sigma is None else float(config.sigma)
    alpha = settings.get("MINDKIT_ALPHA") if config.alpha is None else config.alpha
    if mode == "universal":
        if config.option("probes", "basis") != "basis":
            raise InputError("The universal threshold applies to basis probes only.")
        q, reps, stderr = universal_threshold(n, sigma), None, None
    else:
        probes = _quantile_probes(config, n)
        estimate = calibrate(
            probes, sigma, alpha, mode, config.reps, config.seed, config.workers
        )
        q = estimate.q_alpha
        reps, stderr = estimate.reps, estimate.stderr
        if mode != "mc":
            reps, stderr = None, None
    _emit_report(
        config,
        {
            "command": "quantile",
            "mode": mode,
            "probes": config.option("probes", "basis"),
            "n": n,
            "sigma": sigma,
            "alpha": None if mode == "universal" else alpha,
            "q": q,
            "reps": reps,
            "stderr": stderr,
            "seed": config.seed,
        },
        has_data=False,
    )
    return 0


def cmd_verify(config: RunConfig) -> int:
    results = run_suite(
        config.option("suite", "all"), config.option("instances"), config.seed
    )
    report: List[Dict[str, Any]] = [
        {
            "suite": r.name,
            "passed": r.passed,
            "instances": r.instances,
            "measured": r.measured,
            "limits": r.limits,
            "failures": r.failures,
        }
        for r in results
    ]
    passed = all(r.passed for r in results)
    _emit_report(
        config, {"command": "verify", "passed": passed, "suites": report}, False
    )
    return 0 if passed else 1


# Argument parsing.


def _sigma_arg(text: str) -> SigmaArg:
    if text == "estimate":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'estimate'")
    if value < 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("sigma must be finite and nonnegative")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _common(parser: argparse.ArgumentParser, data: bool = True):
    if data:
        parser.add_argument("--input", help="CSV file with the data column")
        parser.add_argument("--output", help="data output file (default stdout)")
        parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--report", help="JSON report file")
    parser.add_argument("--sigma", type=_sigma_arg, help="noise level or 'estimate'")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=_positive_int, help="Monte Carlo replications")
    parser.add_argument("--workers", type=_positive_int, default=1)
    parser.add_argument("--intervals", choices=("all", "dyadic", "auto"))
    level = parser.add_mutually_exclusive_group()
    level.add_argument("--alpha", type=float, help="significance level in (0, 1)")
    level.add_argument("--q", type=float, help="threshold, overrides calibration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mindkit", description="Multiscale constrained estimation."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("simulate", help="write a noisy test signal")
    _common(p)
    p.add_argument("--signal", choices=signal_names(), default="piecewise-smooth")
    p.add_argument("--n", type=_positive_int, default=1024)
    p.add_argument("--jumps", type=int, default=10)
    p.set_defaults(handler=cmd_simulate, method=None)

    p = commands.add_parser("estimate", help="fit a multiscale estimator")
    _common(p)
    p.add_argument("--method", choices=ESTIMATE_METHODS, required=True)
    p.add_argument("--design", help="CSV design matrix, one row per observation")
    p.add_argument("--order", type=int, help="difference or Sobolev order")
    p.add_argument("--norm", type=float, choices=(1.0, 2.0, math.inf))
    p.add_argument("--block-size", type=_positive_int)
    p.set_defaults(handler=cmd_estimate)

    p = commands.add_parser("segment", help="piecewise constant segmentation")
    _common(p)
    p.add_argument("--method", choices=SEGMENT_METHODS, default="mcps")
    p.add_argument("--penalty", choices=("none", "log"), default="log")
    p.add_argument("--gamma", type=float, help="jump penalty for potts")
    p.set_defaults(handler=cmd_segment)

    p = commands.add_parser("quantile", help="calibrate the threshold q")
    _common(p, data=False)
    p.add_argument("--mode", choices=QUANTILE_MODES, default="mc")
    p.add_argument("--probes", choices=QUANTILE_PROBES, default="basis")
    p.add_argument("--penalty", choices=("none", "log"), default="log")
    p.add_argument("--n", type=_positive_int, default=1024)
    p.add_argument("--block-size", type=_positive_int)
    p.set_defaults(handler=cmd_quantile, method=None, output=None, format="json")

    p = commands.add_parser("verify", help="run the equivalence checks")
    p.add_argument(
        "suite",
        nargs="?",
        choices=list(SUITES) + list(SUITE_ALIASES) + ["all"],
        default="all",
    )
    p.add_argument("--instances", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="JSON report file")
    p.set_defaults(handler=cmd_verify, method=None, format="json")
    return parser


def _configure_logging(verbose: int):
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(settings.get("MINDKIT_LOG_LEVEL")).upper())
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _fail(err: MindError, code: int) -> int:
    payload = {"error": type(err).__name__, "message": str(err)}
    if isinstance(err, InfeasibleError):
        payload["slack"] = err.slack
    print(json.dumps(payload, cls=ReportEncoder))
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    handler = args.handler
    try:
        config = RunConfig.from_args(args)
        return handler(config)
    except InputError as err:
        logger.error("%s", err)
        return _fail(err, 2)
    except MindError as err:
        logger.error("%s", err)
        return _fail(err, 1)
