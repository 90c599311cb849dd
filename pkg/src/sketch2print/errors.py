"""Shared error taxonomy.

Every error a caller can act on has its own class; the HTTP layer and the
CLI map them to status codes / exit codes by type.
"""

from __future__ import annotations

from enum import Enum


class Sketch2PrintError(Exception):
    """Base class for all package errors."""

    kind = "Internal"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.kind)
        self.detail = detail or self.kind


# --- validation -------------------------------------------------------------


class ValidationError(Sketch2PrintError):
    kind = "Validation"


class UnsupportedImage(ValidationError):
    kind = "UnsupportedImage"


class EmptyText(ValidationError):
    kind = "EmptyText"


class IndexOutOfRange(ValidationError):
    kind = "IndexOutOfRange"


class TextFlaggedImage(ValidationError):
    kind = "TextFlaggedImage"


class DimensionMismatch(ValidationError):
    kind = "DimensionMismatch"


class TooFewImages(ValidationError):
    kind = "TooFewImages"


class EmptyCorpus(ValidationError):
    kind = "EmptyCorpus"


class EmptyManifest(ValidationError):
    kind = "EmptyManifest"


class UnknownBackend(ValidationError):
    kind = "UnknownBackend"


# --- state machine ----------------------------------------------------------


class InvalidState(Sketch2PrintError):
    kind = "InvalidState"


class AllBackendsFailed(Sketch2PrintError):
    kind = "AllBackendsFailed"


# --- mesh kernel ------------------------------------------------------------


class MeshParseError(Sketch2PrintError):
    kind = "MeshParseError"


class TooManyTriangles(Sketch2PrintError):
    kind = "TooManyTriangles"


class NonmanifoldBoundary(Sketch2PrintError):
    kind = "NonmanifoldBoundary"


# --- store ------------------------------------------------------------------


class NotFound(Sketch2PrintError):
    kind = "NotFound"


class CorruptLog(Sketch2PrintError):
    kind = "CorruptLog"


class SequenceConflict(Sketch2PrintError):
    kind = "SequenceConflict"


class IoFailure(Sketch2PrintError):
    kind = "IoFailure"


class OutputDirUnwritable(Sketch2PrintError):
    kind = "OutputDirUnwritable"


class FingerprintMismatch(Sketch2PrintError):
    kind = "FingerprintMismatch"


# --- providers --------------------------------------------------------------


class ProviderErrorKind(str, Enum):
    SAFETY_REJECTED = "SafetyRejected"
    RATE_LIMITED = "RateLimited"
    TRANSIENT = "Transient"
    MALFORMED = "Malformed"
    UNAVAILABLE = "Unavailable"


RETRYABLE_KINDS = frozenset(
    {
        ProviderErrorKind.RATE_LIMITED,
        ProviderErrorKind.TRANSIENT,
        ProviderErrorKind.UNAVAILABLE,
    }
)


class ProviderError(Sketch2PrintError):
    """A classified failure from an external generative provider."""

    def __init__(self, kind: ProviderErrorKind, detail: str = ""):
        self.provider_kind = ProviderErrorKind(kind)
        self.kind = self.provider_kind.value
        super().__init__(detail or self.kind)

    @property
    def retryable(self) -> bool:
        return self.provider_kind in RETRYABLE_KINDS
