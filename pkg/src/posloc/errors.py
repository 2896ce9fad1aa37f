"""Exception types shared across the package.

The CLI maps these onto exit codes, so raising the right class matters:
config problems, violated model assumptions, existence failures and accuracy
failures are reported differently to callers.
"""

import math


class PoslocError(Exception):
    """Base class for all package errors."""


class ConfigError(PoslocError):
    """Malformed run configuration (bad JSON, schema violation, unknown keys)."""


class InvalidParameterError(PoslocError, ValueError):
    """Parameter outside its admissible range."""


class AssumptionError(PoslocError):
    """Model density fails the shape assumptions required by the theory."""


class NonNormalizableError(PoslocError):
    """Density kernel does not integrate to a finite constant."""


class NoRootError(PoslocError):
    """Root bracketing or iteration failed."""


class ExistenceError(PoslocError):
    """Requested quantity (posterior minimizer, finite risk, ...) does not exist."""


class SingularityError(PoslocError):
    """Evaluation requested exactly at a non-differentiable or singular point."""


class InternalConsistencyError(PoslocError):
    """Two routes to the same quantity disagree beyond tolerance."""


class AccuracyError(PoslocError):
    """Requested numerical tolerance could not be certified.

    Carries the best available estimate so callers can still inspect it.
    """

    def __init__(self, message, estimate=math.nan, error=math.inf):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
