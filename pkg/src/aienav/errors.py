"""Exception hierarchy shared by every module."""


class AieError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AieError, ValueError):
    pass


class NonConvergentGainError(AieError):
    pass


class DegenerateInnovationError(AieError):
    pass


class IllConditionedUpdateError(AieError):
    pass


class DivergenceError(AieError):
    """Raised when an input estimate leaves the configured bound."""

    def __init__(self, message, step=None, channel=None):
        super().__init__(message)
        self.step = step
        self.channel = channel


class DegenerateDataError(AieError, ValueError):
    pass


class OutOfProjectionError(AieError, ValueError):
    pass


class DegenerateRunError(AieError):
    pass


class IncompatibleReportError(AieError, ValueError):
    pass


class ValidationError(AieError, ValueError):
    """Configuration or input-file validation failure."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
