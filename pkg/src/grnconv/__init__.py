"""Generalized Rayleigh-normal distributions and random number conversion via restricted storage."""

from .errors import (BracketError, CapacityError, CaseError, ConfigError,
                     ConvergenceError, DomainError, GrnConvError, NormError,
                     RangeError, RateError, SizeError, UniformError)

__version__ = "0.1.0"

__all__ = [
    "BracketError", "CapacityError", "CaseError", "ConfigError", "ConvergenceError",
    "DomainError", "GrnConvError", "NormError", "RangeError", "RateError",
    "SizeError", "UniformError", "__version__",
]
