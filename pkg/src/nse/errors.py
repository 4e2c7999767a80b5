"""Exception types shared across the package."""


class NseError(Exception):
    """Base class for all package errors."""


class InvalidParameter(NseError, ValueError):
    """A constructor or function argument violates its stated domain."""


class ShapeMismatch(NseError, ValueError):
    """An array argument has the wrong length or shape for the given grid."""


class ConventionViolation(NseError, RuntimeError):
    """Data breaks a structural convention (e.g. a malformed coefficient set)."""


class AllMasked(NseError, RuntimeError):
    """Every coefficient at a scale was rejected by the mask threshold."""


class DegenerateSample(NseError, ValueError):
    """A statistic was requested on a sample it is undefined for."""


class ConfigError(NseError, ValueError):
    """A run configuration file is malformed or inconsistent."""
