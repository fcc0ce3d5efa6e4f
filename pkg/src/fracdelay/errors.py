"""Exception hierarchy.

Validation problems derive from ``ValueError`` (CLI exit 2); numerical
failures derive from ``NumericalError`` (CLI exit 3).
"""


class FracDelayError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FracDelayError, ValueError):
    """Bad input: violated precondition, wrong shape, unknown option."""


class DomainError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class PoleError(DomainError):
    """Gamma evaluated at a non-positive integer."""


class ConfigError(ValidationError):
    """Invalid run configuration; ``field`` names the offending key path."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ConstraintError(ValidationError):
    """Parameters break the invariance condition of a catalog entry."""


class StepIncompatibleError(ValidationError):
    """Step size does not divide a delay."""


class SingularityError(DomainError):
    """Pointwise evaluation of a kernel term at its integrable singularity."""


class NumericalError(FracDelayError, ArithmeticError):
    pass


class GammaOverflowError(NumericalError, OverflowError):
    pass


class SeriesConvergenceError(NumericalError):
    pass


class QuadratureError(NumericalError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class OracleDivergenceError(NumericalError):
    pass


class IllConditionedBasisError(NumericalError):
    def __init__(self, message, cond=None):
        self.cond = cond
        super().__init__(message)
