"""Similarity scoring: 0-100 clamped-cosine scores, alignment and
diversity reports, nearest-rank percentile exemplars."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyCorpus, TooFewImages, ValidationError
from .embed import Embedder, EmbeddingVector


@dataclass(frozen=True)
class SimilarityScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"similarity score {self.value} outside [0, 100]")


def clip_score(a: EmbeddingVector, b: EmbeddingVector) -> SimilarityScore:
    """100 * max(0, cosine(a, b)), clamped into [0, 100].

    Identical vectors score exactly 100: the cosine is computed as
    dot(a,b) / sqrt(dot(a,a) * dot(b,b)), which is exactly 1.0 when the
    arrays are equal.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions differ: {a.dimension} vs {b.dimension}")
    ab = float(np.dot(a.values, b.values))
    aa = float(np.dot(a.values, a.values))
    bb = float(np.dot(b.values, b.values))
    if aa == 0.0 or bb == 0.0:
        return SimilarityScore(0.0)
    # aa*bb can underflow to 0 for norms near 1e-160 even though both
    # factors are nonzero; such vectors score 0 like exact zero vectors.
    denominator = math.sqrt(aa * bb)
    if denominator == 0.0:
        return SimilarityScore(0.0)
    cosine = ab / denominator
    return SimilarityScore(100.0 * min(1.0, max(0.0, cosine)))


def pairwise_diversity(images: list[EmbeddingVector]) -> SimilarityScore:
    """Mean clip_score over all C(n,2) unordered pairs.

    Lower values mean a more diverse image set.
    """
    n = len(images)
    if n < 2:
        raise TooFewImages(f"need at least 2 embeddings, got {n}")
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += clip_score(images[i], images[j]).value
            pairs += 1
    return SimilarityScore(total / pairs)


# --- alignment report --------------------------------------------------------


@dataclass(frozen=True)
class AlignmentRow:
    record_id: str
    sketch_text: float
    image_text_mean: float
    sketch_image_mean: float


@dataclass(frozen=True)
class AlignmentReport:
    rows: tuple[AlignmentRow, ...]
    sketch_text_mean: float
    image_text_mean: float
    sketch_image_mean: float

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "record_id": r.record_id,
                    "sketch_text": r.sketch_text,
                    "image_text_mean": r.image_text_mean,
                    "sketch_image_mean": r.sketch_image_mean,
                }
                for r in self.rows
            ],
            "corpus_means": {
                "sketch_text": self.sketch_text_mean,
                "image_text": self.image_text_mean,
                "sketch_image": self.sketch_image_mean,
            },
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["record_id", "sketch_text", "image_text_mean", "sketch_image_mean"])
        for r in self.rows:
            writer.writerow([r.record_id, r.sketch_text, r.image_text_mean, r.sketch_image_mean])
        return buf.getvalue()


def alignment_rows_from_embeddings(
    record_id: str,
    sketch: EmbeddingVector,
    text: EmbeddingVector,
    images: list[EmbeddingVector],
) -> AlignmentRow:
    if not images:
        raise ValidationError(f"record {record_id!r} has no images")
    image_text = [clip_score(img, text).value for img in images]
    sketch_image = [clip_score(sketch, img).value for img in images]
    return AlignmentRow(
        record_id=record_id,
        sketch_text=clip_score(sketch, text).value,
        image_text_mean=sum(image_text) / len(image_text),
        sketch_image_mean=sum(sketch_image) / len(sketch_image),
    )


def alignment_report_from_rows(rows: list[AlignmentRow]) -> AlignmentReport:
    if not rows:
        raise EmptyCorpus("alignment corpus is empty")
    n = len(rows)
    return AlignmentReport(
        rows=tuple(rows),
        sketch_text_mean=sum(r.sketch_text for r in rows) / n,
        image_text_mean=sum(r.image_text_mean for r in rows) / n,
        sketch_image_mean=sum(r.sketch_image_mean for r in rows) / n,
    )


def alignment_report(
    corpus: list[tuple[str, bytes, str, list[bytes]]], embedder: Embedder
) -> AlignmentReport:
    """Build the three-pairing alignment report over (id, sketch, description,
    images[]) records: sketch<->text, mean image<->text, mean sketch<->image."""
    if not corpus:
        raise EmptyCorpus("alignment corpus is empty")
    rows = []
    for record_id, sketch_bytes, description, image_bytes in corpus:
        sketch_vec = embedder.embed_image(sketch_bytes)
        text_vec = embedder.embed_text(description)
        image_vecs = [embedder.embed_image(b) for b in image_bytes]
        rows.append(alignment_rows_from_embeddings(record_id, sketch_vec, text_vec, image_vecs))
    return alignment_report_from_rows(rows)


# --- diversity distribution ---------------------------------------------------


@dataclass(frozen=True)
class PercentileExemplar:
    percentile: float
    set_id: str
    score: float


@dataclass(frozen=True)
class DiversityDistribution:
    scores: tuple[tuple[str, float], ...]
    exemplars: tuple[PercentileExemplar, ...]

    def to_dict(self, histogram_bins: int = 20) -> dict:
        values = [s for _, s in self.scores]
        counts, edges = np.histogram(values, bins=histogram_bins, range=(0.0, 100.0))
        return {
            "sets": [{"set_id": sid, "score": score} for sid, score in self.scores],
            "exemplars": [
                {"percentile": e.percentile, "set_id": e.set_id, "score": e.score}
                for e in self.exemplars
            ],
            "histogram": {
                "bin_edges": [float(e) for e in edges],
                "counts": [int(c) for c in counts],
            },
        }


def nearest_rank_index(percentile: float, n: int) -> int:
    """0-based index of the nearest-rank percentile over n ascending values."""
    rank = max(1, math.ceil(percentile / 100.0 * n))
    return rank - 1


def percentile_exemplars(
    scores: list[tuple[str, float]], percentiles: list[float]
) -> DiversityDistribution:
    """Pick the sets sitting at the requested nearest-rank percentiles."""
    if not scores:
        raise EmptyCorpus("no diversity scores")
    for p in percentiles:
        if not 0.0 <= p <= 100.0:
            raise ValidationError(f"percentile {p} outside [0, 100]")
    ordered = sorted(scores, key=lambda pair: (pair[1], pair[0]))
    exemplars = []
    for p in percentiles:
        set_id, score = ordered[nearest_rank_index(p, len(ordered))]
        exemplars.append(PercentileExemplar(percentile=float(p), set_id=set_id, score=score))
    return DiversityDistribution(scores=tuple(scores), exemplars=tuple(exemplars))
