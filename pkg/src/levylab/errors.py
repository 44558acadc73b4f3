"""Exception hierarchy shared by every levylab module."""

from __future__ import annotations


class LevyLabError(Exception):
    """Base class for all levylab errors."""


class ParameterError(LevyLabError, ValueError):
    """Invalid construction parameter (e.g. a non-positive rate)."""


class DomainError(LevyLabError, ValueError):
    """Evaluation point lies outside an open domain.

    ``endpoint`` is the violated endpoint (``-inf``/``inf`` never appear here,
    they cannot be violated), ``value`` the offending argument.
    """

    def __init__(self, message: str, value=None, endpoint=None):
        super().__init__(message)
        self.value = value
        self.endpoint = endpoint


class DataError(LevyLabError, ValueError):
    """Input data is inconsistent (non-positive prices, non-convex calls, ...)."""


class InsufficientDataError(DataError):
    """A required sample (such as q=0 or q=1) is missing."""


class NumericalError(LevyLabError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Carries the best estimate obtained and an error bound when available.
    """

    def __init__(self, message: str, estimate=None, bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.bound = bound


class UnsupportedError(LevyLabError, NotImplementedError):
    """Operation not available for this kind of object."""


class ActivityError(LevyLabError, ValueError):
    """Jump rate requested over an interval touching an infinite-activity origin."""
