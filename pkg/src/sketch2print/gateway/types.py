"""Value types shared by all provider backends."""

from __future__ import annotations

import io
from dataclasses import dataclass

from PIL import Image

from ..errors import UnsupportedImage, ValidationError


@dataclass(frozen=True)
class DescribeResult:
    """What the vision model said about a sketch.

    description: human-readable explanation.
    generation_prompt: reworded for the image generator.
    """

    description: str
    generation_prompt: str

    def __post_init__(self):
        if not self.description or not self.generation_prompt:
            raise ValidationError("describe result fields must be non-empty")


@dataclass(frozen=True)
class GeneratedImage:
    """One provider-produced image plus the prompt it actually used."""

    data: bytes
    revised_prompt: str

    def __post_init__(self):
        try:
            with Image.open(io.BytesIO(self.data)) as img:
                if img.format != "PNG":
                    raise UnsupportedImage(f"expected PNG, got {img.format}")
                width, height = img.size
        except UnsupportedImage:
            raise
        except Exception as exc:
            raise UnsupportedImage(f"image does not decode: {exc}") from exc
        if width < 64 or height < 64:
            raise UnsupportedImage(f"image too small: {width}x{height}")


@dataclass(frozen=True)
class RetryPolicy:
    """Capped exponential backoff with proportional jitter.

    Delays are milliseconds: base_delay_ms * multiplier**(attempt-1),
    capped at max_delay_ms, then jittered by +-jitter_fraction.
    """

    max_attempts: int = 5
    base_delay_ms: float = 500.0
    multiplier: float = 2.0
    jitter_fraction: float = 0.1
    max_delay_ms: float = 10_000.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be positive")
        if self.base_delay_ms < 0 or self.max_delay_ms < 0:
            raise ValidationError("delays must be non-negative")
        if self.multiplier < 1.0:
            raise ValidationError("multiplier must be >= 1")
        if not 0.0 <= self.jitter_fraction <= 1.0:
            raise ValidationError("jitter_fraction must be in [0, 1]")

    def delay_ms(self, attempt: int, uniform: float = 0.0) -> float:
        """Delay after a failed `attempt` (1-based); `uniform` in [-1, 1]."""
        raw = self.base_delay_ms * self.multiplier ** (attempt - 1)
        capped = min(raw, self.max_delay_ms)
        return capped * (1.0 + self.jitter_fraction * uniform)
