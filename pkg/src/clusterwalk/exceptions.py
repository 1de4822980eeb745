"""Exception types shared across the package."""

from __future__ import annotations


class ClusterwalkError(Exception):
    """Base class for package errors."""


class InputError(ClusterwalkError, ValueError):
    """Bad user-supplied data or parameters (CLI exit code 2)."""


class ParseError(InputError):
    """Malformed record in an input file; carries path and line number."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class ConfigurationError(ClusterwalkError, RuntimeError):
    """Unusable configuration: bad credentials, malformed endpoint, infeasible spec."""


class RunAborted(ClusterwalkError):
    """A clustering run failed mid-flight; `.trace` holds the partial counters."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
