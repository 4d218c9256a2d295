"""Knowledge transferability analysis and transfer learning for AM process monitoring."""

__version__ = "0.1.0"

from .errors import (
    AmTransferError,
    DescriptorError,
    IngestError,
    LabelingError,
    ShapeError,
    TaggingError,
    TrainingContractError,
    ValidationError,
)
from .knowledge import (
    KnowledgeComponent,
    KnowledgeContext,
    KnowledgeLevel,
    load_bundled_context,
    load_context,
    save_context,
)
from .pretransfer import (
    ComponentScore,
    PreTransferReport,
    compare_components,
    maturity,
    pretransfer_score,
    rank_sources,
)
from .scenario import MethodFamily, Scenario, TransferPlan, compare

__all__ = [
    "AmTransferError",
    "ComponentScore",
    "DescriptorError",
    "IngestError",
    "KnowledgeComponent",
    "KnowledgeContext",
    "KnowledgeLevel",
    "LabelingError",
    "MethodFamily",
    "PreTransferReport",
    "Scenario",
    "ShapeError",
    "TaggingError",
    "TrainingContractError",
    "TransferPlan",
    "ValidationError",
    "compare",
    "compare_components",
    "load_bundled_context",
    "load_context",
    "maturity",
    "pretransfer_score",
    "rank_sources",
    "save_context",
    "__version__",
]
