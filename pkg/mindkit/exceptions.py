from typing import Optional


class MindError(Exception):
    """
    Base class of every error raised by mindkit.
    """


class InputError(MindError, ValueError):
    """
    Invalid input: dimension mismatch, non-dyadic length, out of range level.
    """


class UnsupportedError(MindError, NotImplementedError):
    """
    The request is well formed but outside what the solver can do, such as a
    non-convex regularizer handed to a convex solver.
    """


class InfeasibleError(MindError):
    """
    The constraint set is empty, or the solver could not find a point in it.

    :param str message: Human readable explanation.
    :param float slack: Smallest constraint violation observed, if known.
    """

    def __init__(self, message: str, slack: Optional[float] = None):
        super().__init__(message)
        self.slack = slack
