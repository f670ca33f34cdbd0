"""Exception hierarchy shared by every module."""


class SelectEnsembleError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(SelectEnsembleError, ValueError):
    """Input data violates a documented precondition."""


class ParseError(ValidationError):
    """A text input could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationError(SelectEnsembleError, ValueError):
    """Parameters are inconsistent with each other or with the data."""


class CapacityError(ConfigurationError):
    """Requested an exact computation that is too large to run."""


class UndefinedCorrelationError(SelectEnsembleError, ArithmeticError):
    """A correlation was requested for a vector with zero weighted variance."""
