"""Embedding-based alignment and diversity metrics."""

from .embed import Embedder, EmbeddingVector, HistogramEmbedder, decode_image
from .scores import (
    AlignmentReport,
    AlignmentRow,
    DiversityDistribution,
    PercentileExemplar,
    SimilarityScore,
    alignment_report,
    alignment_report_from_rows,
    alignment_rows_from_embeddings,
    clip_score,
    nearest_rank_index,
    pairwise_diversity,
    percentile_exemplars,
)

__all__ = [
    "AlignmentReport",
    "AlignmentRow",
    "DiversityDistribution",
    "Embedder",
    "EmbeddingVector",
    "HistogramEmbedder",
    "PercentileExemplar",
    "SimilarityScore",
    "alignment_report",
    "alignment_report_from_rows",
    "alignment_rows_from_embeddings",
    "clip_score",
    "decode_image",
    "nearest_rank_index",
    "pairwise_diversity",
    "percentile_exemplars",
]
