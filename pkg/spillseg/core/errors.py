"""Error taxonomy and exit-code classification.

Every failure the package raises on purpose is a ``SpillSegError`` carrying
the process exit code the CLI should return, so commands can surface a
one-line diagnostic instead of a traceback.
"""

from __future__ import annotations

import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class SpillSegError(Exception):
    """Base class for all deliberate spillseg failures."""

    exit_code: int = EXIT_USAGE
    error_type: str = "usage"


class ConfigError(SpillSegError, ValueError):
    """Invalid or unknown configuration values."""

    error_type = "config"


class ShapeError(SpillSegError, ValueError):
    """Tensor shapes or operator arguments that do not fit together."""

    error_type = "shape"


class DataError(SpillSegError):
    """Unreadable, missing or inconsistent data on disk."""

    exit_code = EXIT_DATA
    error_type = "data"


class CheckpointError(DataError):
    """Corrupt, truncated or incompatible checkpoint."""

    error_type = "checkpoint"


class NumericError(SpillSegError, ArithmeticError):
    """Non-finite values during training or gradient checking."""

    exit_code = EXIT_NUMERIC
    error_type = "numeric"


def exit_code_for(exc: BaseException) -> int:
    """Return the CLI exit code for *exc*."""
    return classify_error(exc)["exit_code"]


def classify_error(exc: BaseException) -> dict:
    """Classify an exception and return a structured error dict.

    Returns a dict with keys:
        error_type: 'config' | 'shape' | 'data' | 'checkpoint' | 'numeric' | 'io' | 'unexpected'
        error: human-readable message
        exit_code: process exit code
    """
    if isinstance(exc, SpillSegError):
        return {
            "error_type": exc.error_type,
            "error": str(exc),
            "exit_code": exc.exit_code,
        }

    if isinstance(exc, FileNotFoundError):
        return {
            "error_type": "io",
            "error": f"file not found: {exc.filename or exc}",
            "exit_code": EXIT_DATA,
        }

    if isinstance(exc, OSError):
        return {
            "error_type": "io",
            "error": str(exc),
            "exit_code": EXIT_DATA,
        }

    logger.debug("unclassified error %r", exc)
    return {
        "error_type": "unexpected",
        "error": str(exc) or type(exc).__name__,
        "exit_code": EXIT_USAGE,
    }
