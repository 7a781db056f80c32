"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PersuasionError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(PersuasionError, ValueError):
    """Malformed or inconsistent input (shapes, probabilities, ranges)."""


class DomainError(PersuasionError, ValueError):
    """Input is well formed but outside the operation's domain."""


class NoAdjustmentError(DomainError):
    """A posterior cannot be moved because its target region is empty."""


class UnsupportedDimensionError(DomainError):
    pass


class InternalConsistencyError(PersuasionError, RuntimeError):
    """A result contradicts a proven structural property; never expected."""


class InstanceFileError(InvalidInputError):
    """Validation failure while loading an instance file.

    ``line`` is 1-based, or ``None`` when the problem is not tied to a line.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = path or "<instance>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.message = message
