"""Custom exceptions and the exit-code mapping used by the command line."""

from typing import Any, Dict, Optional


class PckdException(Exception):
    """Base application exception."""

    def __init__(
        self,
        code: str,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        exit_code: int = 1,
    ):
        self.code = code
        self.message = message
        self.details = details or {}
        self.exit_code = exit_code
        super().__init__(message)

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extras = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.message} ({extras})"


class ConfigurationError(PckdException):
    """Shape, dimension or configuration conflict."""

    def __init__(self, message: str = "Invalid configuration", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            code="CONFIGURATION",
            message=message,
            details=details,
            exit_code=2,
        )


class DomainError(PckdException):
    """Input is well-formed but outside the operation's domain."""

    def __init__(self, message: str = "Domain error", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            code="DOMAIN",
            message=message,
            details=details,
        )


class NumericError(PckdException):
    """Non-finite value in a loss or a gradient block."""

    def __init__(self, message: str = "Non-finite value", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            code="NUMERIC",
            message=message,
            details=details,
        )


class InputParseError(PckdException):
    """Malformed line in an interaction file."""

    def __init__(self, line: int, message: str = "Malformed line", details: Optional[Dict[str, Any]] = None):
        self.line = line
        super().__init__(
            code="PARSE",
            message=f"{message} at line {line}",
            details=details,
        )


class CheckpointFormatError(PckdException):
    """Checkpoint file is truncated, foreign, or of the wrong kind."""

    def __init__(self, message: str = "Invalid checkpoint file", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            code="FORMAT",
            message=message,
            details=details,
        )


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to a process exit code."""
    if isinstance(exc, PckdException):
        return exc.exit_code
    return 1
