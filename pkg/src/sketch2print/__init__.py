"""sketch2print: sketch -> description -> concept images -> mesh -> STL.

The public surface is re-exported here; submodules stay importable for
anything narrower (sketch2print.mesh, sketch2print.metrics, ...).
"""

from .config import AppConfig, build_embedder, build_gateway, build_pipeline, load_config
from .dataset import DatasetBuilder, SourceManifest, load_source_manifest, validate
from .errors import ProviderError, ProviderErrorKind, Sketch2PrintError
from .gateway import Gateway, RetryPolicy, mock_gateway
from .mesh import ManufacturabilityReport, RepairPlan, TriangleMesh, analyze, apply_plan
from .metrics import HistogramEmbedder, clip_score, pairwise_diversity
from .pipeline import PipelineService, Route
from .session import DesignSession, Stage
from .store import DataStore

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "DataStore",
    "DatasetBuilder",
    "DesignSession",
    "Gateway",
    "HistogramEmbedder",
    "ManufacturabilityReport",
    "PipelineService",
    "ProviderError",
    "ProviderErrorKind",
    "RepairPlan",
    "RetryPolicy",
    "Route",
    "Sketch2PrintError",
    "SourceManifest",
    "Stage",
    "TriangleMesh",
    "analyze",
    "apply_plan",
    "build_embedder",
    "build_gateway",
    "build_pipeline",
    "clip_score",
    "load_config",
    "load_source_manifest",
    "mock_gateway",
    "pairwise_diversity",
    "validate",
    "__version__",
]
