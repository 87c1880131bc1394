"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""

from __future__ import annotations


class StochrayError(Exception):
    """Base class for all package-specific errors."""


class DomainError(StochrayError, ValueError):
    """An input violates a documented domain guard (bad parameter value)."""


class FarFieldViolation(DomainError):
    """Evaluation distance is inside the far-field limit (requires r > 1 m)."""


class UnsupportedBeta(DomainError):
    """No closed form exists for the requested anomaly exponent."""


class SourceInClosedCell(DomainError):
    """Ray source placed inside an obstacle cell."""


class MissingSpacing(DomainError):
    """Neither a cell side nor a mean obstacle gap was supplied."""


class LengthMismatch(DomainError):
    """Paired sequences differ in length or alignment."""


class NonConvergence(StochrayError):
    """An iterative numeric procedure failed to reach the requested tolerance.

    Carries the best estimate obtained and the error bound achieved so
    callers can decide whether the partial result is still usable.
    """

    def __init__(self, message: str, best_estimate: float | None = None,
                 error_bound: float | None = None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


class InsufficientSamples(StochrayError):
    """A Monte Carlo estimate has too few contributing samples to be usable."""


class ConfigError(StochrayError):
    """Bad CLI configuration: unknown key, malformed value, missing input."""
