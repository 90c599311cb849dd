"""Provider abstraction: live HTTP adapters, deterministic mocks, retries."""

from .base import (
    Describer,
    Gateway,
    ImageToMesh,
    SketchGuided,
    TextToImage,
    mock_gateway,
    require_raster,
)
from .live import (
    LiveDescriber,
    LiveImageToMesh,
    LiveSketchGuided,
    LiveTextToImage,
    classify_status,
    classify_transport_error,
)
from .mock import (
    IMAGE_SIZE,
    SAFETY_TRIGGER,
    MockDescriber,
    MockImageToMesh,
    MockSketchGuided,
    MockTextToImage,
    mock_mesh_backends,
    png_text_chunks,
)
from .retry import TokenBucket, call_with_retry
from .types import DescribeResult, GeneratedImage, RetryPolicy

__all__ = [
    "IMAGE_SIZE",
    "SAFETY_TRIGGER",
    "DescribeResult",
    "Describer",
    "Gateway",
    "GeneratedImage",
    "ImageToMesh",
    "LiveDescriber",
    "LiveImageToMesh",
    "LiveSketchGuided",
    "LiveTextToImage",
    "MockDescriber",
    "MockImageToMesh",
    "MockSketchGuided",
    "MockTextToImage",
    "RetryPolicy",
    "SketchGuided",
    "TextToImage",
    "TokenBucket",
    "call_with_retry",
    "classify_status",
    "classify_transport_error",
    "mock_gateway",
    "mock_mesh_backends",
    "png_text_chunks",
    "require_raster",
]
