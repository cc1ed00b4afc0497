"""
Exceptions raised by the splitter.

Every error that should end a command-line run carries the process exit code the
CLI reports for it.
"""

from typing import Optional


class SplitterError(Exception):
    """Base class for all errors the CLI turns into an exit code."""

    exit_code: int = 1


class InputError(SplitterError):
    """An input file is missing, unreadable or not in the declared format."""

    exit_code = 2


class DatasetFormatError(InputError):
    """A data set line could not be parsed."""

    def __init__(self, reason: str, line_number: Optional[int] = None):
        self.reason = reason
        self.line_number = line_number
        if line_number is None:
            super().__init__(reason)
        else:
            super().__init__(f"line {line_number}: {reason}")


class ConfigError(SplitterError):
    """The fold specification or the command-line options are invalid."""

    exit_code = 3


class OracleSizeError(SplitterError):
    """The instance has too many size-feasible assignments to enumerate."""

    exit_code = 4


class AssignmentError(SplitterError):
    """An assignment does not match the data set or the fold specification."""

    exit_code = 5


class EmptyFrontError(SplitterError, ValueError):
    """A knee was requested from a Pareto front with no solutions."""
