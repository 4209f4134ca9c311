"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data and file
problems exit 2, numeric failures exit 3.
"""


class USRError(Exception):
    exit_code = 2


class UsageError(USRError):
    exit_code = 1


class DimensionError(USRError, ValueError):
    exit_code = 2


class ParameterError(USRError, ValueError):
    exit_code = 2


class DataError(USRError, ValueError):
    exit_code = 2


class NumericError(USRError, ArithmeticError):
    exit_code = 3


class CheckpointError(DataError):
    """Base class for checkpoint read failures."""


class CorruptCheckpointError(CheckpointError):
    pass


class IncompatibleCheckpointError(CheckpointError):
    def __init__(self, message, names=()):
        super().__init__(message)
        self.names = list(names)
