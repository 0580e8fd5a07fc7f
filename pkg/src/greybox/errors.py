"""Exception types shared across the toolkit."""

from __future__ import annotations


class GreyboxError(Exception):
    """Base class for all toolkit-specific failures."""


class ConfigError(GreyboxError):
    """Invalid configuration, structure description, or CLI input."""


class CsvFormatError(GreyboxError):
    """Malformed CSV content, with the offending location when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = "".join(
            f", {kind} {value}"
            for kind, value in (("row", row), ("column", column))
            if value is not None
        )
        super().__init__(message + loc)
        self.row = row
        self.column = column


class DivergenceError(GreyboxError):
    """A simulated or iterated trajectory left the finite range."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SingularityError(GreyboxError):
    """A linear solve or closed-form expression hit a singular point."""

    def __init__(self, message: str, cond: float | None = None):
        super().__init__(message)
        self.cond = cond


class SelectionError(GreyboxError):
    """No admissible candidate was available to a decision maker."""
