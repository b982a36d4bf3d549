"""Exception types raised across the package."""


class InvalidSimplex(ValueError):
    """Probability vector is not a valid point on the simplex."""


class DimensionMismatch(ValueError):
    """Paired inputs have different lengths."""


class DomainError(ValueError):
    """Scalar argument outside its mathematical domain."""


class EmptyBatch(ValueError):
    """Batched loss called with zero items."""


class InvalidConfig(ValueError):
    """Model, cohort, or sweep configuration violates its invariants."""


class ShapeMismatch(ValueError):
    """Tensor arguments have incompatible shapes."""


class StaleTape(RuntimeError):
    """backward() called without a matching forward pass."""


class EmptyDataset(ValueError):
    """Training requires at least one example."""


class NonFiniteLoss(ArithmeticError):
    """Loss became NaN or infinite during training; aborts the run."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class MissingStats(ValueError):
    """Clinical encoding requires normalization statistics."""


class InsufficientData(ValueError):
    """Not enough values for the requested statistic."""


class BadMagic(OSError):
    """File does not start with the expected magic bytes."""


class VersionMismatch(OSError):
    """File format version is not supported by this build."""


class InvalidK(ValueError):
    """Fold count incompatible with the dataset size."""


class EmptyInput(ValueError):
    """Metric called with no observations."""
