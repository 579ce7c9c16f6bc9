"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so library code raises the most
specific class that applies.
"""


class AeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(AeError, ValueError):
    exit_code = 2


class DataError(AeError, ValueError):
    exit_code = 3


class EmptyInput(DataError):
    pass


class NonFiniteSample(DataError):
    def __init__(self, index, value):
        super().__init__(f"non-finite sample {value!r} at index {index}")
        self.index = index
        self.value = value


class DegenerateSignal(DataError):
    pass


class InsufficientSignal(DataError):
    """Raised when free (non-event) signal cannot host the requested segments."""

    def __init__(self, message, achievable):
        super().__init__(message)
        self.achievable = achievable


class NumericalError(AeError, ArithmeticError):
    exit_code = 4
