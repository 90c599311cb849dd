"""HTTP provider adapters.

Each adapter speaks plain JSON to a configurable base URL. The wire shapes
follow the common hosted-model conventions but are adapters only; nothing
above this file knows about them. Every failure is classified into exactly
one ProviderError kind. Logs never include credentials.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging

import httpx

from ..errors import ProviderError, ProviderErrorKind
from .types import DescribeResult, GeneratedImage

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 60.0
MESH_TIMEOUT_S = 120.0

_SAFETY_MARKERS = ("content_policy", "content policy", "safety", "moderation")


def classify_status(status: int, body: bytes) -> ProviderError:
    """Map a non-2xx response to the error taxonomy."""
    text = body.decode("utf-8", errors="replace")
    detail = f"HTTP {status}: {text[:200]}"
    if status == 429:
        return ProviderError(ProviderErrorKind.RATE_LIMITED, detail)
    if status >= 500:
        return ProviderError(ProviderErrorKind.UNAVAILABLE, detail)
    lowered = text.lower()
    if any(marker in lowered for marker in _SAFETY_MARKERS):
        return ProviderError(ProviderErrorKind.SAFETY_REJECTED, detail)
    return ProviderError(ProviderErrorKind.MALFORMED, detail)


def classify_transport_error(exc: Exception) -> ProviderError:
    """Network/timeout trouble is transient; anything else is malformed."""
    if isinstance(exc, (httpx.TimeoutException, httpx.TransportError)):
        return ProviderError(ProviderErrorKind.TRANSIENT, f"transport: {exc}")
    return ProviderError(ProviderErrorKind.MALFORMED, f"client error: {exc}")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ProviderError(
            ProviderErrorKind.MALFORMED, f"bad base64 in {what}: {exc}"
        ) from exc


class _HttpProvider:
    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        model: str = "",
        timeout_s: float = DEFAULT_TIMEOUT_S,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self.model = model
        self._client = httpx.Client(
            base_url=base_url,
            headers=headers,
            timeout=timeout_s,
            transport=transport,
        )

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except Exception as exc:
            # Redacted: method and path only, never headers or body.
            logger.warning("POST %s failed in transport: %s", path, type(exc).__name__)
            raise classify_transport_error(exc) from exc
        logger.debug("POST %s -> %s", path, response.status_code)
        if response.status_code < 200 or response.status_code >= 300:
            raise classify_status(response.status_code, response.content)
        try:
            body = response.json()
        except json.JSONDecodeError as exc:
            raise ProviderError(
                ProviderErrorKind.MALFORMED, f"non-JSON response from {path}"
            ) from exc
        if not isinstance(body, dict):
            raise ProviderError(
                ProviderErrorKind.MALFORMED, f"unexpected response shape from {path}"
            )
        return body

    def close(self) -> None:
        self._client.close()


class LiveDescriber(_HttpProvider):
    def describe(self, sketch: bytes, note: str) -> DescribeResult:
        body = self._post(
            "/describe",
            {"image_b64": _b64(sketch), "note": note, "model": self.model},
        )
        try:
            return DescribeResult(
                description=body["description"],
                generation_prompt=body["generation_prompt"],
            )
        except KeyError as exc:
            raise ProviderError(
                ProviderErrorKind.MALFORMED, f"describe response missing {exc}"
            ) from exc


def _parse_images(body: dict, expected: int) -> list[GeneratedImage]:
    items = body.get("images")
    if not isinstance(items, list) or len(items) != expected:
        raise ProviderError(
            ProviderErrorKind.MALFORMED,
            f"expected {expected} images, got {items if items is None else len(items)}",
        )
    out = []
    for item in items:
        try:
            out.append(
                GeneratedImage(
                    data=_unb64(item["b64"], "image"),
                    revised_prompt=item.get("revised_prompt", ""),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ProviderError(
                ProviderErrorKind.MALFORMED, f"bad image entry: {exc}"
            ) from exc
    return out


class LiveTextToImage(_HttpProvider):
    def __init__(self, *args, resolution: str = "1024x1024", **kwargs):
        super().__init__(*args, **kwargs)
        self.resolution = resolution

    def text_to_images(self, prompt: str, n: int) -> list[GeneratedImage]:
        body = self._post(
            "/images",
            {"prompt": prompt, "n": n, "size": self.resolution, "model": self.model},
        )
        return _parse_images(body, n)


class LiveSketchGuided(_HttpProvider):
    def __init__(self, *args, resolution: str = "1024x1024", **kwargs):
        super().__init__(*args, **kwargs)
        self.resolution = resolution

    def sketch_guided_images(
        self, sketch: bytes, prompt: str, n: int
    ) -> list[GeneratedImage]:
        body = self._post(
            "/guided-images",
            {
                "image_b64": _b64(sketch),
                "prompt": prompt,
                "n": n,
                "size": self.resolution,
                "model": self.model,
            },
        )
        return _parse_images(body, n)


class LiveImageToMesh(_HttpProvider):
    def __init__(self, *args, backend: str = "", **kwargs):
        kwargs.setdefault("timeout_s", MESH_TIMEOUT_S)
        super().__init__(*args, **kwargs)
        self.backend = backend

    def image_to_mesh(self, image: bytes) -> bytes:
        body = self._post(
            "/mesh", {"image_b64": _b64(image), "backend": self.backend}
        )
        try:
            return _unb64(body["ply_b64"], "mesh")
        except KeyError as exc:
            raise ProviderError(
                ProviderErrorKind.MALFORMED, f"mesh response missing {exc}"
            ) from exc
