"""Custom exceptions for the explainability engine."""

from typing import Optional

EXIT_INTERNAL = 1
EXIT_ARGUMENT = 2
EXIT_FILE = 3
EXIT_CAPABILITY = 4


class XaiException(Exception):
    """Base exception for engine errors."""

    exit_code: int = EXIT_INTERNAL

    def __init__(self, detail: str = "An engine error occurred"):
        self.detail = detail
        super().__init__(self.detail)


class InvalidArgumentException(XaiException):
    """Exception for invalid arguments or configuration values."""

    exit_code = EXIT_ARGUMENT

    def __init__(self, detail: str = "Invalid argument"):
        super().__init__(detail)


class DimensionException(InvalidArgumentException):
    """Exception for a tensor whose shape does not fit a layer."""

    def __init__(self, layer_id: str, detail: str = "shape mismatch"):
        self.layer_id = layer_id
        super().__init__(f"Layer '{layer_id}': {detail}")


class SeedIndexException(InvalidArgumentException):
    """Exception for a backward seed outside the output range."""

    def __init__(self, index: int, size: int):
        self.index = index
        super().__init__(f"Seed index {index} out of range for output of size {size}")


class BudgetException(InvalidArgumentException):
    """Exception for a computation that would exceed its enumeration budget."""

    def __init__(self, detail: str = "Computation budget exceeded"):
        super().__init__(detail)


class FileException(XaiException):
    """Exception for IO failures, tagged with the offending path."""

    exit_code = EXIT_FILE

    def __init__(self, path: str, detail: str = "IO error"):
        self.path = str(path)
        super().__init__(f"{self.path}: {detail}")


class FormatException(XaiException):
    """Exception for malformed weight or image files."""

    exit_code = EXIT_FILE

    def __init__(self, offset: int, detail: str = "Malformed file", tensor: Optional[str] = None):
        self.offset = offset
        self.tensor = tensor
        where = f"byte {offset}"
        if tensor is not None:
            where += f" (tensor '{tensor}')"
        super().__init__(f"{detail} at {where}")


class CapabilityException(XaiException):
    """Exception for an explainer that needs gradients from an opaque model."""

    exit_code = EXIT_CAPABILITY

    def __init__(self, detail: str = "Model does not expose gradients; use lime or shap"):
        super().__init__(detail)


class NumericException(XaiException):
    """Exception for non-finite values."""

    def __init__(self, detail: str = "Non-finite value encountered"):
        super().__init__(detail)


class TapeStateException(XaiException):
    """Exception for a tape used out of order."""

    def __init__(self, detail: str = "backward called before forward"):
        super().__init__(detail)


class TrainingDivergedException(NumericException):
    """Exception for a loss that became non-finite during training."""

    def __init__(self, epoch: int, lr: float):
        self.epoch = epoch
        self.lr = lr
        super().__init__(f"Training diverged in epoch {epoch} (lr={lr})")


class IllConditionedException(NumericException):
    """Exception for normal equations that stay singular after maximum jitter."""

    def __init__(self, detail: str = "Normal equations are ill-conditioned"):
        super().__init__(detail)


class SingularMatrixException(NumericException):
    """Exception for a pivot below tolerance in Gaussian elimination."""

    def __init__(self, detail: str = "Matrix is singular"):
        super().__init__(detail)


class InternalConsistencyException(XaiException):
    """Exception for a violated internal invariant (an implementation bug)."""

    def __init__(self, detail: str = "Internal consistency check failed"):
        super().__init__(detail)
