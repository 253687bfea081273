"""Exception types raised across the package."""


class InvalidDomainError(ValueError):
    """Domain parameters do not describe a valid nonempty set."""


class ShapeFileError(ValueError):
    """A shape or parameter file could not be parsed."""


class NumericalFailure(RuntimeError):
    """An iterative solver did not converge.

    ``residuals`` holds the residual history (last entry is the final one).
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)

    @property
    def residual(self):
        return self.residuals[-1] if self.residuals else float("nan")


class DescentError(RuntimeError):
    """Shape descent aborted; ``trace`` holds the partial descent record."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DiagnosticsError(RuntimeError):
    """Not enough data to evaluate a diagnostic."""
