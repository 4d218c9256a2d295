"""Exception types shared across the package."""


class AmTransferError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(AmTransferError):
    """A document or value object violates its schema or invariants."""


class DescriptorError(AmTransferError):
    """A context lacks the components needed to form a domain/task descriptor."""


class ShapeError(AmTransferError):
    """Tensor or frame shapes are inconsistent with the model contract."""


class IngestError(AmTransferError):
    """An image directory or file could not be ingested."""


class LabelingError(AmTransferError):
    """An operation that requires labeled data met an unlabeled item."""


class TaggingError(AmTransferError):
    """A layer could not be assigned to a freeze group."""


class TrainingContractError(AmTransferError):
    """Training input violates the training contract (e.g. anomalous windows)."""
