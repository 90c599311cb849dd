"""Provider protocols and the gateway facade.

The facade validates inputs, applies the retry policy, and meters calls
through optional per-capability token buckets. Providers themselves stay
dumb: one upstream round per call.
"""

from __future__ import annotations

import io
import random
import time
from collections.abc import Callable, Mapping
from typing import Protocol

from PIL import Image

from ..errors import EmptyText, UnknownBackend, UnsupportedImage, ValidationError
from .retry import TokenBucket, call_with_retry
from .types import DescribeResult, GeneratedImage, RetryPolicy


class Describer(Protocol):
    def describe(self, sketch: bytes, note: str) -> DescribeResult: ...


class TextToImage(Protocol):
    def text_to_images(self, prompt: str, n: int) -> list[GeneratedImage]: ...


class SketchGuided(Protocol):
    def sketch_guided_images(
        self, sketch: bytes, prompt: str, n: int
    ) -> list[GeneratedImage]: ...


class ImageToMesh(Protocol):
    def image_to_mesh(self, image: bytes) -> bytes: ...


def require_raster(data: bytes, what: str = "image") -> None:
    """Reject bytes that do not decode as a raster image."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.verify()
    except Exception as exc:
        raise UnsupportedImage(f"{what} does not decode: {exc}") from exc


class Gateway:
    """Single entry point for the four generative capabilities."""

    def __init__(
        self,
        describer: Describer,
        text_to_image: TextToImage,
        sketch_guided: SketchGuided,
        mesh_backends: Mapping[str, ImageToMesh],
        *,
        retry_policy: RetryPolicy | None = None,
        rate_limiters: Mapping[str, TokenBucket] | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self._describer = describer
        self._text_to_image = text_to_image
        self._sketch_guided = sketch_guided
        self._mesh_backends = dict(mesh_backends)
        self.retry_policy = retry_policy or RetryPolicy()
        self._limiters = dict(rate_limiters or {})
        self._sleep = sleep
        self._rng = rng

    @property
    def mesh_backend_names(self) -> list[str]:
        return sorted(self._mesh_backends)

    def _call(self, capability: str, fn):
        limiter = self._limiters.get(capability)

        def attempt():
            if limiter is not None:
                limiter.acquire()
            return fn()

        return call_with_retry(
            attempt, self.retry_policy, sleep=self._sleep, rng=self._rng
        )

    def describe(self, sketch: bytes, note: str = "") -> DescribeResult:
        require_raster(sketch, "sketch")
        return self._call("describe", lambda: self._describer.describe(sketch, note))

    def text_to_images(self, prompt: str, n: int = 4) -> list[GeneratedImage]:
        if not prompt:
            raise EmptyText("prompt must be non-empty")
        if n < 1:
            raise ValidationError("image count must be positive")
        return self._call(
            "text_to_images", lambda: self._text_to_image.text_to_images(prompt, n)
        )

    def sketch_guided_images(
        self, sketch: bytes, prompt: str = "", n: int = 4
    ) -> list[GeneratedImage]:
        require_raster(sketch, "sketch")
        if n < 1:
            raise ValidationError("image count must be positive")
        return self._call(
            "sketch_guided_images",
            lambda: self._sketch_guided.sketch_guided_images(sketch, prompt, n),
        )

    def image_to_mesh(self, image: bytes, backend: str) -> bytes:
        require_raster(image)
        try:
            provider = self._mesh_backends[backend]
        except KeyError:
            raise UnknownBackend(
                f"no mesh backend {backend!r}; have {self.mesh_backend_names}"
            ) from None
        return self._call("image_to_mesh", lambda: provider.image_to_mesh(image))


def mock_gateway(seed: int = 0, **kwargs) -> Gateway:
    """Fully offline gateway wired to the deterministic mocks."""
    from .mock import (
        MockDescriber,
        MockSketchGuided,
        MockTextToImage,
        mock_mesh_backends,
    )

    return Gateway(
        MockDescriber(seed),
        MockTextToImage(seed),
        MockSketchGuided(seed),
        mock_mesh_backends(seed),
        **kwargs,
    )
