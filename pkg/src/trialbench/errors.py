"""Exception hierarchy shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class DataError(WorkbenchError):
    """Malformed or invalid corpus data, selections, or request payloads."""


class SelectionError(DataError):
    """A selection cannot be resolved against the loaded snapshot."""


class NonEstimableError(WorkbenchError):
    """A study cannot produce an effect estimate on the requested scale.

    Callers that iterate over a study set catch this and record an
    exclusion instead of aborting the whole analysis.
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NumericalError(WorkbenchError):
    """An iterative numerical routine failed to reach its target."""


class QuadratureError(NumericalError):
    """Numerical integration did not converge to the requested tolerance."""

    def __init__(self, message: str, error_estimate: float | None = None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConvergenceError(NumericalError):
    """An optimizer hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, last_iterate: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
