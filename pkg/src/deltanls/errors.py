"""Exception hierarchy shared by all modules."""


class DeltaNLSError(Exception):
    """Base class for package errors."""


class ParameterError(DeltaNLSError, ValueError):
    """Parameters outside the admissible regime."""


class SearchError(DeltaNLSError, RuntimeError):
    """A bracketing or refinement search failed."""

    def __init__(self, message, bracket=None):
        super().__init__(message if bracket is None else f"{message} (bracket={bracket})")
        self.bracket = bracket


class NumericalError(DeltaNLSError, RuntimeError):
    """A linear algebra or integration step failed."""


class SpectralConditionError(DeltaNLSError, RuntimeError):
    """The linearized operator fails the spectral condition."""


class BlowUpError(DeltaNLSError, RuntimeError):
    """Sup norm of a trajectory grew past the abort threshold."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DecompositionError(DeltaNLSError, RuntimeError):
    """Newton iteration for the modulation parameters failed."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


class FitError(DeltaNLSError, ValueError):
    """Not enough samples for a log-log fit."""


class UsageError(DeltaNLSError, ValueError):
    """Bad command line or configuration input."""
