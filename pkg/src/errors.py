"""Exception types shared across the toolkit.

Each class also derives from the builtin that would otherwise be raised, so
callers that only catch ``ValueError`` or ``RuntimeError`` keep working.
"""

from pathlib import Path
from typing import Any, Dict, Optional


class InvalidArgumentError(ValueError):
    """Bad shapes, indices, counts or other caller-supplied arguments."""


class ConfigurationError(ValueError):
    """A configuration value is unknown, inconsistent or unsupported."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class CheckpointError(ConfigurationError):
    """Checkpoint cannot be read or does not match the requested architecture."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (underflow, non-convergence)."""


class IngestionError(RuntimeError):
    """Dataset files are missing, corrupt, or fail their checksum."""

    def __init__(self, message: str, path: Optional[Path] = None):
        super().__init__(message)
        self.path = path


class TrainingFailure(RuntimeError):
    """An auxiliary training job finished but missed its quality floor."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingAborted(RuntimeError):
    """The training loop stopped early; points at the last good checkpoint."""

    def __init__(self, message: str, last_checkpoint: Optional[Path] = None, step: Optional[int] = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.step = step
