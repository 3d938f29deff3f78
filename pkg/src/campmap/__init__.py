"""campmap: map marketing campaigns onto a product-type taxonomy, build
purchase attribution labels, and evaluate mapping quality."""

from .inference import (
    Bm25Mapper,
    Campaign,
    CoverageSet,
    DenseRetrievalMapper,
    RagPipelineMapper,
    ZeroShotMapper,
)
from .providers import ProviderConfig, RelevanceGrade
from .taxonomy import PTNode, Taxonomy, load_taxonomy

__all__ = [
    "Bm25Mapper",
    "Campaign",
    "CoverageSet",
    "DenseRetrievalMapper",
    "PTNode",
    "ProviderConfig",
    "RagPipelineMapper",
    "RelevanceGrade",
    "Taxonomy",
    "ZeroShotMapper",
    "load_taxonomy",
]

__version__ = "0.1.0"
