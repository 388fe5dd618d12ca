"""Exception hierarchy shared by every module of the package."""


class GrnConvError(Exception):
    """Base class for all errors raised by grnconv."""


class DomainError(GrnConvError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(GrnConvError, ArithmeticError):
    """Iteration budget exhausted before the requested tolerance."""


class BracketError(GrnConvError, ValueError):
    """Root bracket whose endpoint values share a sign."""


class CaseError(GrnConvError, ValueError):
    """Root requested outside the parameter regime where it exists."""


class CapacityError(GrnConvError, ValueError):
    """Storage capacity below one slot."""


class SizeError(GrnConvError, ValueError):
    """Instance too large for an exhaustive or enumerative routine."""


class RateError(GrnConvError, ValueError):
    """First-order rate that is not semi-admissible."""


class RangeError(GrnConvError, ValueError):
    """Target value outside the attainable range of a monotone function."""


class UniformError(GrnConvError, ValueError):
    """Operation undefined for a uniform (zero-varentropy) distribution."""


class NormError(GrnConvError, ValueError):
    """State vector or amplitude matrix is not normalised."""


class ConfigError(GrnConvError, ValueError):
    """Malformed command-line or file configuration."""
