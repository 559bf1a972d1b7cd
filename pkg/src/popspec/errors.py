"""Exception hierarchy shared across the package."""


class PopspecError(Exception):
    """Base class for all package errors."""


class DomainError(PopspecError, ValueError):
    """An argument lies outside the domain of the operation."""


class LengthError(DomainError):
    """Not enough moments (or other entries) were supplied."""


class NumericalError(PopspecError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class InversionError(NumericalError):
    """Moment-to-measure inversion failed at a named stage.

    The pipeline catches these and falls back to merging clusters.
    """

    stage = "inversion"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class NotPositiveDefiniteError(InversionError):
    stage = "hankel"


class ComplexRootError(InversionError):
    stage = "roots"


class NegativeWeightError(InversionError):
    stage = "weights"


class SupportError(InversionError):
    stage = "support"


class EstimationError(PopspecError):
    """The estimation pipeline exhausted its fallback chain."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
