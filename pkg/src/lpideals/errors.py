"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every error raised on purpose
derives from :class:`LabError`.
"""


class LabError(Exception):
    """Base class for all errors raised on purpose by this package."""


class DimensionError(LabError, ValueError):
    """A vector or matrix has the wrong length or shape."""


class DegenerateInputError(LabError, ValueError):
    """The input is degenerate for the requested operation (zero vector, singular matrix)."""


class CompositionError(LabError, ValueError):
    """Two operators or spaces do not fit together."""


class DomainError(LabError, ValueError):
    """A parameter is outside the domain where the operation is defined."""


class ConfigError(LabError, ValueError):
    """Invalid configuration (exponent ranges, mismatched systems, bad paths)."""


class CapacityError(LabError):
    """A requested size exceeds the configured capacity."""


class InterpolationError(LabError, ValueError):
    """No interpolation parameter is consistent with the requested exponents."""


class SearchFailure(LabError):
    """An exhaustive search finished without finding a witness."""
