"""Exception types shared across the package."""


class GeorelayError(Exception):
    """Base class for all package errors."""


class ConfigError(GeorelayError):
    """Scenario file failed schema validation or contains unusable values."""


class InfeasibleError(GeorelayError):
    """A resource-allocation problem has no feasible solution.

    ``max_bits`` carries the best deliverable bit count when the failure is a
    per-link bit target that cannot be met at maximum power.
    """

    def __init__(self, message, max_bits=None, index=None):
        super().__init__(message)
        self.max_bits = max_bits
        self.index = index


class SingularSystemError(GeorelayError):
    """A finite-field linear system has no unique solution (contract violation)."""


class InternalError(GeorelayError):
    """An internal invariant failed; indicates a bug, not bad input."""
