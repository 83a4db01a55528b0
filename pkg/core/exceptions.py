"""
Error hierarchy.

Every error derives from ``I2C2WError`` and from the closest builtin, so
``except ValueError`` keeps working for callers that do not know this module.
"""
from pathlib import Path
from typing import Optional


class I2C2WError(Exception):
    """Base class for all recognizer errors."""


# ==================== LABELS ====================

class UnknownSymbol(I2C2WError, ValueError):
    """Character outside [0-9a-zA-Z] and the null marker."""


class WordTooLong(I2C2WError, ValueError):
    """Normalized word longer than N-2."""


class EmptyWord(I2C2WError, ValueError):
    """Normalization removed every character."""


# ==================== NUMERICS ====================

class ShapeMismatch(I2C2WError, ValueError):
    pass


class BadDim(I2C2WError, ValueError):
    pass


class NonFinite(I2C2WError, ArithmeticError):
    """NaN or Inf where finite values are required."""


class InfeasibleTarget(I2C2WError, ValueError):
    """No CTC path of the given length collapses to the target."""


# ==================== DATA ====================

class EmptyBatch(I2C2WError, ValueError):
    pass


class EmptyDataset(I2C2WError, ValueError):
    pass


class IOFailure(I2C2WError, OSError):
    def __init__(self, message: str, path: Optional[Path] = None):
        super().__init__(message)
        self.path = path


# ==================== TRAINING ====================

class DivergenceDetected(I2C2WError, RuntimeError):
    def __init__(self, message: str, step: int, checkpoint_path: Optional[Path] = None):
        super().__init__(message)
        self.step = step
        self.checkpoint_path = checkpoint_path


class CheckpointError(I2C2WError, ValueError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CorruptBlob(CheckpointError):
    pass


# ==================== CLI ====================

class UsageError(I2C2WError, ValueError):
    pass
