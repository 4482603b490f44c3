"""
Test signals on the grid ``t_i = i / n``, ``i = 1..n``.

The smooth-with-jumps families follow the usual wavelet-denoising test bed;
each is rescaled to unit sup-norm so a noise level reads as a fraction of
the signal amplitude.
"""
from typing import Callable
from typing import Dict
from typing import List

import numpy as np

from mindkit.changepoint import random_step_signal
from mindkit.exceptions import InputError


_BLOCK_POSITIONS = np.array(
    [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81]
)
_BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_WIDTHS = np.array(
    [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005]
)
_BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])


def grid(n: int) -> np.ndarray:
    if n < 1:
        raise InputError("Signal length must be positive.")
    return np.arange(1, n + 1) / n


def _normalized(v: np.ndarray) -> np.ndarray:
    peak = float(np.abs(v).max())
    return v / peak if peak > 0 else v


def blocks(t: np.ndarray) -> np.ndarray:
    steps = np.heaviside(t[:, None] - _BLOCK_POSITIONS[None, :], 1.0)
    return steps @ _BLOCK_HEIGHTS


def bumps(t: np.ndarray) -> np.ndarray:
    u = np.abs(t[:, None] - _BLOCK_POSITIONS[None, :]) / _BUMP_WIDTHS[None, :]
    return (1.0 + u) ** -4 @ _BUMP_HEIGHTS


def heavisine(t: np.ndarray) -> np.ndarray:
    return 4.0 * np.sin(4.0 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


def doppler(t: np.ndarray) -> np.ndarray:
    return np.sqrt(t * (1.0 - t)) * np.sin(2.1 * np.pi / (t + 0.05))


def piecewise_smooth(t: np.ndarray) -> np.ndarray:
    """
    Smooth oscillation with two jumps, a kink and a narrow bump.
    """
    wave = 0.5 * np.sin(4.0 * np.pi * t)
    plateau = 0.6 * ((t >= 0.3) & (t < 0.55))
    ramp = np.where(t >= 0.8, 1.5 * (t - 0.8) - 0.4, 0.0)
    bump = 0.5 * np.exp(-(((t - 0.65) / 0.02) ** 2))
    return wave + plateau + ramp + bump


SIGNALS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "blocks": blocks,
    "bumps": bumps,
    "heavisine": heavisine,
    "doppler": doppler,
    "piecewise-smooth": piecewise_smooth,
}


def signal_names() -> List[str]:
    return sorted(SIGNALS) + ["steps"]


def make_signal(name: str, n: int, seed: int = 0, jumps: int = 10) -> np.ndarray:
    """
    Samples a named signal at ``n`` points.

    ``steps`` draws a random piecewise constant signal with ``jumps`` jumps
    from ``seed``; all other signals are deterministic.

    :param str name: One of ``signal_names()``.
    :param int n: Number of samples.
    :param int seed: Seed for random signals.
    :param int jumps: Number of jumps of the ``steps`` signal.
    :rtype: numpy.ndarray
    """
    if name == "steps":
        gap = max(1, n // (4 * (jumps + 1)))
        return random_step_signal(n, jumps, seed, min_gap=gap)[0]
    try:
        shape = SIGNALS[name]
    except KeyError:
        raise InputError(
            "Unknown signal {0!r}; choose from {1}.".format(
                name, ", ".join(signal_names())
            )
        )
    return _normalized(shape(grid(n)))
