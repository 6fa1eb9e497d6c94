"""Exception types raised by muqm."""


class MuqmError(Exception):
    """Base class for all muqm errors."""


class UnsupportedPrecisionError(MuqmError, ValueError):
    """Requested resolution is finer than float64 can represent on the grid."""


class NumericDomainError(MuqmError, ArithmeticError):
    """Input lies outside the numeric domain of an operation."""


class CollapseContractError(MuqmError, RuntimeError):
    """Collapse requested on a computationally stable state without override."""


class ConfigError(MuqmError, ValueError):
    """Malformed or inconsistent experiment configuration."""
