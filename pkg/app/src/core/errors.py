"""
Exception hierarchy shared by every package of the application.

Errors that have a natural built-in counterpart also inherit from it, so
callers can keep catching ``ValueError``/``IndexError``/``FileNotFoundError``.
"""

from typing import Optional


class VLMError(Exception):
    """Base class for all application errors"""


# tensor core
class ShapeError(VLMError, ValueError):
    """Operand shapes are incompatible"""


class DTypeError(VLMError, TypeError):
    """Operands have different dtypes"""


class NonFiniteError(VLMError, ArithmeticError):
    """A forward op produced NaN or Inf"""


class TapeError(VLMError, RuntimeError):
    """backward() called on a tensor that is not on an active tape"""


class GradCheckError(VLMError):
    """The function under a gradient check is not deterministic"""


class DuplicateParameterError(VLMError, KeyError):
    """Two parameters share the same hierarchical name"""


class TargetIndexError(VLMError, IndexError):
    """A class target is outside the logits width"""


# model
class VocabularyError(VLMError, KeyError):
    """A word is missing from the closed vocabulary"""

    def __init__(self, word: str):
        super().__init__(f"Unknown word in vocabulary: {word!r}")
        self.word = word

    def __str__(self) -> str:
        return self.args[0]


class ContractViolationError(VLMError, ValueError):
    """An input violates an operation contract (e.g. a non-unit embedding)"""


class CapacityError(VLMError, ValueError):
    """A prompt does not fit into the text context length"""


# training
class TrainingError(VLMError, RuntimeError):
    """Training cannot start or cannot continue"""


class TrainingDivergedError(TrainingError):
    """The loss became non-finite during training"""

    def __init__(self, step: int, lr: float, detail: Optional[str] = None):
        message = f"Loss diverged at step {step} (lr={lr:g})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.step = step
        self.lr = lr


# data / metrics
class DataError(VLMError, ValueError):
    """Invalid data request (unknown family, unbalanced split, short supply)"""


class MetricError(VLMError, ValueError):
    """A metric is undefined for the given items"""


# persistence
class CheckpointError(VLMError):
    """Base class for checkpoint decoding problems"""


class MagicMismatchError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


class CheckpointFormatError(CheckpointError):
    """Truncated file, unknown dtype tag or malformed tensor table"""


# configuration / command line
class ConfigError(VLMError, ValueError):
    """Invalid or unknown configuration key"""


class UsageError(VLMError):
    """Bad command-line usage"""
