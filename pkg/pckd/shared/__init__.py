"""Shared utilities and schemas."""

from .exceptions import (
    CheckpointFormatError,
    ConfigurationError,
    DomainError,
    InputParseError,
    NumericError,
    PckdException,
    exit_code_for,
)
from .files import atomic_write_bytes, atomic_write_text
from .schemas import BackboneKind, Mode, Role, Split, validate_config

__all__ = [
    "PckdException",
    "ConfigurationError",
    "DomainError",
    "NumericError",
    "InputParseError",
    "CheckpointFormatError",
    "exit_code_for",
    "atomic_write_bytes",
    "atomic_write_text",
    "BackboneKind",
    "Mode",
    "Role",
    "Split",
    "validate_config",
]
