"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage/config errors exit 1,
data errors exit 2, numeric failures exit 3.
"""


class HandrecError(Exception):
    """Base class for all package errors."""


class ConfigError(HandrecError):
    """Invalid configuration: unknown keys, bad values, inconsistent shapes requested."""


class DataError(HandrecError):
    """Broken input data: missing files, malformed index lines, bad image files."""


class CoverageError(DataError):
    """A word or character cannot be handled by the current charset/embedding table."""


class ShapeError(HandrecError):
    """Tensor shape does not match the configured contract."""


class InvalidInputError(HandrecError):
    """Input values violate a precondition (non-finite pixels, empty strings, ...)."""


class DegenerateInputError(HandrecError):
    """Numerically degenerate input: collinear control points, zero-norm vectors."""


class NumericError(HandrecError):
    """Non-finite loss or other numeric failure during optimization."""
