"""Exception hierarchy shared across the package."""


class LamcError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LamcError):
    """Invalid user-supplied configuration (bad cluster count, thresholds, ...)."""


class MatrixFormatError(LamcError):
    """Malformed input file (Matrix Market / CSV parse failures)."""


class DataDomainError(LamcError):
    """Entries violate the data domain: negative, non-finite, out of bounds."""


class PlannerError(LamcError):
    """No admissible partition plan exists for the given prior/threshold."""


class NumericalError(LamcError):
    """A numerical stage failed beyond recovery."""


class EmptyBlockError(NumericalError):
    """A block contains no nonzero entry and cannot be normalized."""


class SvdConvergenceError(NumericalError):
    """Truncated SVD failed to reach the residual tolerance within the cap."""
