"""Embedding vectors and the deterministic test embedder.

The test embedder is semantics-free by design: images map to a 64-bin
downsampled grayscale intensity histogram and text maps to hashed token
counts in the same dimension, both L2-normalized. It exercises the metric
math and plumbing; semantic claims need a live embedding service.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import EmptyText, UnsupportedImage


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    normalized: bool

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.ascontiguousarray(np.asarray(self.values, dtype=np.float64)).ravel()
        )

    @property
    def dimension(self) -> int:
        return len(self.values)

    def normalize(self) -> "EmbeddingVector":
        norm = float(np.linalg.norm(self.values))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return EmbeddingVector(self.values / norm, normalized=True)


class Embedder(Protocol):
    """Joint image/text embedding provider."""

    dimension: int

    def embed_image(self, image: bytes) -> EmbeddingVector: ...

    def embed_text(self, text: str) -> EmbeddingVector: ...


def decode_image(data: bytes) -> Image.Image:
    """Decode PNG/JPEG bytes, raising UnsupportedImage on anything else."""
    if not data:
        raise UnsupportedImage("empty image bytes")
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UnsupportedImage(f"cannot decode image: {exc}") from exc
    return image


class HistogramEmbedder:
    """Deterministic test-mode embedder (dimension 64)."""

    def __init__(self, dimension: int = 64, thumb_size: int = 32):
        self.dimension = dimension
        self.thumb_size = thumb_size

    def embed_image(self, image: bytes) -> EmbeddingVector:
        gray = decode_image(image).convert("L")
        thumb = gray.resize((self.thumb_size, self.thumb_size), Image.Resampling.BILINEAR)
        pixels = np.asarray(thumb, dtype=np.float64).ravel()
        bins = np.clip((pixels * self.dimension / 256.0).astype(np.int64), 0, self.dimension - 1)
        counts = np.bincount(bins, minlength=self.dimension).astype(np.float64)
        return EmbeddingVector(counts, normalized=False).normalize()

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyText("cannot embed empty text")
        counts = np.zeros(self.dimension, dtype=np.float64)
        for position, token in enumerate(text.lower().split()):
            digest = hashlib.sha256(f"{position}\x00{token}".encode("utf-8")).digest()
            bin_index = int.from_bytes(digest[:4], "big") % self.dimension
            # Fractional weight makes accidental bin collisions between
            # different token streams vanishingly unlikely.
            counts[bin_index] += 1.0 + digest[4] / 256.0
        if not counts.any():
            raise EmptyText("text contains no tokens")
        return EmbeddingVector(counts, normalized=False).normalize()


class LiveEmbedder:
    """HTTP embedding provider: POST /embed returning a raw float vector."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        model: str = "",
        dimension: int = 512,
        timeout_s: float = 60.0,
        transport=None,
    ):
        import httpx

        from ..errors import ProviderError, ProviderErrorKind

        self._ProviderError = ProviderError
        self._kinds = ProviderErrorKind
        self.dimension = dimension
        self.model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(
            base_url=base_url, headers=headers, timeout=timeout_s, transport=transport
        )

    def _embed(self, payload: dict) -> EmbeddingVector:
        from ..gateway.live import classify_status, classify_transport_error

        payload["model"] = self.model
        try:
            response = self._client.post("/embed", json=payload)
        except Exception as exc:
            raise classify_transport_error(exc) from exc
        if response.status_code < 200 or response.status_code >= 300:
            raise classify_status(response.status_code, response.content)
        try:
            vector = response.json()["vector"]
            return EmbeddingVector(
                np.asarray(vector, dtype=np.float64), normalized=False
            ).normalize()
        except (KeyError, TypeError, ValueError) as exc:
            raise self._ProviderError(
                self._kinds.MALFORMED, f"bad embedding response: {exc}"
            ) from exc

    def embed_image(self, image: bytes) -> EmbeddingVector:
        import base64

        decode_image(image)
        return self._embed({"image_b64": base64.b64encode(image).decode("ascii")})

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyText("cannot embed empty text")
        return self._embed({"text": text})
