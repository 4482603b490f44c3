"""
Provide default solver and calibration settings.

Every value can be overridden by an environment variable of the same name,
e.g. ``MINDKIT_PDHG_MAX_ITER=50000``.
"""
import os
from typing import Any


DEFAULTS = {
    # Primal-dual hybrid gradient.
    "MINDKIT_PDHG_MAX_ITER": 20000,
    "MINDKIT_PDHG_TOL": 1e-7,
    "MINDKIT_PDHG_STEP": 0.95,
    "MINDKIT_PDHG_SAFETY": 1.05,
    "MINDKIT_PDHG_POWER_ITER": 50,
    "MINDKIT_PDHG_RELAXATION": 1.0,
    "MINDKIT_PDHG_STEP_RATIO": 1.0,
    "MINDKIT_PDHG_CHECK_EVERY": 10,
    # Accelerated proximal gradient.
    "MINDKIT_FISTA_MAX_ITER": 20000,
    "MINDKIT_FISTA_TOL": 1e-12,
    # Monte Carlo calibration.
    "MINDKIT_MC_REPS": 1000,
    "MINDKIT_MC_CHUNK_BUDGET": 20000000,
    "MINDKIT_MC_BOOTSTRAP": 200,
    "MINDKIT_ALPHA": 0.1,
    # Interval systems longer than this use dyadic lengths by default.
    "MINDKIT_INTERVAL_CUTOVER": 2048,
    # Discrepancy principle search bracket for gamma.
    "MINDKIT_GAMMA_MIN": 1e-8,
    "MINDKIT_GAMMA_MAX": 1e8,
    # Feasibility tolerance of constraint checks.
    "MINDKIT_FEASIBILITY_TOL": 1e-9,
    "MINDKIT_LOG_LEVEL": "WARNING",
}


def get(name: str) -> Any:
    default = DEFAULTS[name]
    raw = os.environ.get(name)
    if raw is None:
        return default
    # Coerce to the type of the default, so "1e-6" stays a float.
    return type(default)(raw)
