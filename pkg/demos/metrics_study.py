"""
Alignment and diversity over a synthetic corpus
===============================================

Generates a small image corpus with the offline providers, scores each
record for description alignment and image-set diversity, and renders the
score distribution as a text histogram with percentile exemplars.
"""

import argparse
import io

from PIL import Image, ImageDraw

from sketch2print import HistogramEmbedder, mock_gateway
from sketch2print.metrics import (
    alignment_report,
    pairwise_diversity,
    percentile_exemplars,
)


def synth_sketch(seed: int) -> bytes:
    canvas = Image.new("L", (256, 256), color=255)
    pen = ImageDraw.Draw(canvas)
    pen.ellipse((40 + seed % 30, 60, 200, 210 - seed % 25), outline=0, width=3)
    pen.line((30, 30 + 5 * (seed % 9), 220, 60), fill=0, width=2)
    buffer = io.BytesIO()
    canvas.save(buffer, format="PNG")
    return buffer.getvalue()


def main() -> None:
    parser = argparse.ArgumentParser(description="score a synthetic corpus")
    parser.add_argument("--records", type=int, default=12)
    parser.add_argument("--images-per-record", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    gateway = mock_gateway(seed=args.seed)
    embedder = HistogramEmbedder()

    corpus = []
    diversity_scores = []
    for i in range(args.records):
        sketch = synth_sketch(i)
        described = gateway.describe(sketch, f"study item {i}")
        images = [
            img.data
            for img in gateway.text_to_images(
                described.generation_prompt, args.images_per_record
            )
        ]
        corpus.append((f"rec{i:02d}", sketch, described.description, images))
        vectors = [embedder.embed_image(b) for b in images]
        diversity_scores.append((f"rec{i:02d}", pairwise_diversity(vectors).value))

    report = alignment_report(corpus, embedder)
    means = report.to_dict()["corpus_means"]
    print(f"corpus of {args.records} records, {args.images_per_record} images each")
    print(f"  sketch-text  mean {means['sketch_text']:.2f}")
    print(f"  image-text   mean {means['image_text']:.2f}")
    print(f"  sketch-image mean {means['sketch_image']:.2f}")

    distribution = percentile_exemplars(diversity_scores, [5, 50, 95])
    payload = distribution.to_dict(histogram_bins=10)
    print("\npairwise-diversity histogram (0..100 in 10 bins):")
    peak = max(payload["histogram"]["counts"]) or 1
    for low, count in zip(
        payload["histogram"]["bin_edges"], payload["histogram"]["counts"]
    ):
        bar = "#" * round(24 * count / peak)
        print(f"  {low:5.1f}+ |{bar:<24}| {count}")

    print("\npercentile exemplars (lower score = more diverse set):")
    for e in distribution.exemplars:
        print(f"  p{e.percentile:<3g} {e.set_id}  score {e.score:.2f}")


if __name__ == "__main__":
    main()
