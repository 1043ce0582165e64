"""Exceptions raised by zomd. All of them are ValueErrors at heart."""


class ZomdError(ValueError):
    """Base class for every error raised by the library."""


class InvalidDimensionError(ZomdError):
    """Dimension below 2, or a vector of the wrong length."""


class DomainError(ZomdError):
    """A query or a tuned parameter leaves the mu0-neighborhood of the simplex."""


class TuningError(ZomdError):
    """Parameters for which a theorem's tuning rule is undefined."""


class NonFiniteGradientError(ZomdError):
    """A gradient surrogate with NaN or infinite entries reached the solver."""
