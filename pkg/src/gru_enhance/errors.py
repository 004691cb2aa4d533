"""Categorized error handling with actionable messages.

Provides structured error types with exit codes and recovery suggestions
so that every subcommand fails with a predictable status for scripting.
"""

from __future__ import annotations

from enum import IntEnum
from typing import ClassVar


class ExitCode(IntEnum):
    """Exit codes for scripting integration.

    Standard categories:
    - 0: Success
    - 1: Usage error (bad command line)
    - 2: Configuration error
    - 3: Data / corpus error
    - 4: Model or pipeline mismatch
    - 5: Numerical abort (NaN / divergence)
    """

    SUCCESS = 0
    USAGE_ERROR = 1
    CONFIG_ERROR = 2
    DATA_ERROR = 3
    MODEL_MISMATCH = 4
    NUMERICAL_ABORT = 5


class GruEnhanceError(Exception):
    """Base exception for gru-enhance with structured error info.

    Attributes:
        message: Human-readable error message.
        code: Exit code for scripting.
        suggestion: Actionable recovery suggestion.
        details: Optional additional context.
    """

    code: ClassVar[ExitCode] = ExitCode.USAGE_ERROR
    suggestion: ClassVar[str] = ""

    def __init__(
        self,
        message: str,
        suggestion: str | None = None,
        details: str | None = None,
    ):
        self.message = message
        self._suggestion = suggestion
        self.details = details
        super().__init__(message)

    def get_suggestion(self) -> str:
        """Get the recovery suggestion."""
        return self._suggestion or self.suggestion

    def format_full(self) -> str:
        """Format the complete error message with suggestion."""
        parts = [f"Error: {self.message}"]
        if self.details:
            parts.append(f"Details: {self.details}")
        suggestion = self.get_suggestion()
        if suggestion:
            parts.append(f"Suggestion: {suggestion}")
        return "\n".join(parts)


# Config Errors


class ConfigError(GruEnhanceError):
    """Configuration file could not be read or failed validation."""

    code = ExitCode.CONFIG_ERROR
    suggestion = "Check the config file against configs/default.ini and fix the listed keys."


class InvalidConfigError(GruEnhanceError):
    """A component received parameters outside its valid range."""

    code = ExitCode.CONFIG_ERROR
    suggestion = "Adjust the offending parameter; see the defaults documented in the config file."


# Data Errors


class InvalidInputError(GruEnhanceError):
    """Input signal violates a precondition (empty, non-finite, too short)."""

    code = ExitCode.DATA_ERROR


class UnsupportedFormatError(GruEnhanceError):
    """Audio file is not PCM16 mono 16 kHz WAV."""

    code = ExitCode.DATA_ERROR
    suggestion = "Convert the file to 16-bit PCM, mono, 16000 Hz (e.g. with sox or ffmpeg)."


class CorruptFileError(GruEnhanceError):
    """Audio file is truncated or unreadable."""

    code = ExitCode.DATA_ERROR
    suggestion = "Re-create or re-download the file."


class DegenerateSignalError(GruEnhanceError):
    """Signal is silent where a level measurement is required."""

    code = ExitCode.DATA_ERROR


class InvalidDelayError(GruEnhanceError):
    """Echo delay outside the supported 0..500 ms range."""

    code = ExitCode.DATA_ERROR


class InsufficientCorpusError(GruEnhanceError):
    """Too few files to build train/val/test splits."""

    code = ExitCode.DATA_ERROR
    suggestion = "Provide at least 10 speech files and 10 noise files."


class CorruptTestsetError(GruEnhanceError):
    """Test-set directory is missing files or metadata sidecars."""

    code = ExitCode.DATA_ERROR
    suggestion = "Regenerate the test set with 'gru-enhance synth-data'."


class TooShortError(GruEnhanceError):
    """Clip is too short for an intelligibility measurement."""

    code = ExitCode.DATA_ERROR


# Model / Pipeline Errors


class ShapeError(GruEnhanceError):
    """Array shapes do not agree."""

    code = ExitCode.MODEL_MISMATCH


class InvalidMaskError(GruEnhanceError):
    """Mask values fall outside [0, 1]."""

    code = ExitCode.MODEL_MISMATCH


class ConfigMismatchError(GruEnhanceError):
    """Artifacts were produced with an incompatible configuration."""

    code = ExitCode.MODEL_MISMATCH
    suggestion = "Use a checkpoint trained for this task (check channels and STFT size)."


class InvalidStateError(GruEnhanceError):
    """Operation requires state that is not available (e.g. missing forward cache)."""

    code = ExitCode.MODEL_MISMATCH


class CorruptCheckpointError(GruEnhanceError):
    """Checkpoint failed its integrity check."""

    code = ExitCode.MODEL_MISMATCH
    suggestion = "The checkpoint is truncated or modified; use an earlier checkpoint."


class AttainabilityViolation(GruEnhanceError):
    """Target mask exceeds 1 at some time-frequency points.

    Attributes:
        count: Number of offending points.
    """

    code = ExitCode.MODEL_MISMATCH
    suggestion = "Use an attainable projection mode (per_bin_complex or per_frame_vector)."

    def __init__(self, message: str, count: int, **kwargs: str | None):
        self.count = count
        super().__init__(message, **kwargs)


# Numerical Errors


class NumericalAbortError(GruEnhanceError):
    """Training produced a non-finite loss."""

    code = ExitCode.NUMERICAL_ABORT
    suggestion = "Lower the learning rate or the gradient clip norm and resume from the last checkpoint."


def format_error_for_user(error: Exception, verbose: bool = False) -> str:
    """Format any exception for user display.

    Args:
        error: Exception to format.
        verbose: If True, include details and suggestions.

    Returns:
        Formatted error message string.
    """
    if isinstance(error, GruEnhanceError):
        if verbose:
            return error.format_full()
        return f"Error: {error.message}"
    return f"Error: {error}"


def get_exit_code(error: Exception) -> int:
    """Get the exit code for an exception.

    Args:
        error: Exception to get code for.

    Returns:
        Integer exit code.
    """
    if isinstance(error, GruEnhanceError):
        return error.code
    elif isinstance(error, FileNotFoundError):
        return ExitCode.DATA_ERROR
    elif isinstance(error, ValueError):
        return ExitCode.CONFIG_ERROR
    return ExitCode.USAGE_ERROR


__all__ = [
    "ExitCode",
    "GruEnhanceError",
    "ConfigError",
    "InvalidConfigError",
    "InvalidInputError",
    "UnsupportedFormatError",
    "CorruptFileError",
    "DegenerateSignalError",
    "InvalidDelayError",
    "InsufficientCorpusError",
    "CorruptTestsetError",
    "TooShortError",
    "ShapeError",
    "InvalidMaskError",
    "ConfigMismatchError",
    "InvalidStateError",
    "CorruptCheckpointError",
    "AttainabilityViolation",
    "NumericalAbortError",
    "format_error_for_user",
    "get_exit_code",
]
