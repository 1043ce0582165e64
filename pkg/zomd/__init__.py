"""Zeroth-order mirror descent on the probability simplex."""
from .errors import DomainError, InvalidDimensionError, NonFiniteGradientError, TuningError, ZomdError

__version__ = "0.1.0"
