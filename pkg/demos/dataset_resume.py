"""
Resumable corpus builds
=======================

Builds a small sketch corpus twice: once straight through, once
interrupted halfway and resumed. The two manifest files come out
byte-identical, which is the property that makes long batch runs safe to
kill and restart.
"""

import argparse
import io
import json
import tempfile
from pathlib import Path

from PIL import Image, ImageDraw

from sketch2print import DatasetBuilder, HistogramEmbedder, load_source_manifest, mock_gateway


def write_corpus(root: Path, count: int) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        canvas = Image.new("L", (256, 256), color=255)
        pen = ImageDraw.Draw(canvas)
        pen.ellipse((30 + i * 3, 50, 210, 200 - i * 2), outline=0, width=3)
        buffer = io.BytesIO()
        canvas.save(buffer, format="PNG")
        name = f"sketch-{i:02d}.png"
        (root / name).write_bytes(buffer.getvalue())
        entries.append({"sketch": name, "description": f"demo shape {i}"})
    path = root / "sources.json"
    path.write_text(json.dumps({"entries": entries, "images_per_sketch": 3}))
    return path


def main() -> None:
    parser = argparse.ArgumentParser(description="demonstrate interrupted builds")
    parser.add_argument("--sketches", type=int, default=8)
    args = parser.parse_args()

    work = Path(tempfile.mkdtemp(prefix="s2p-dataset-"))
    source = load_source_manifest(write_corpus(work / "corpus", args.sketches))
    builder = DatasetBuilder(mock_gateway(seed=0), HistogramEmbedder(), workers=4)

    straight = builder.build(source, work / "straight")
    print(f"straight build totals: {straight['totals']}")

    # Simulate an interruption: stop after half the records.
    half = args.sketches // 2
    partial = builder.build(source, work / "resumed", limit=half)
    print(f"interrupted after {partial['records']} records, no manifest yet")

    resumed = builder.resume(source, work / "resumed")
    print(f"resumed build totals:  {resumed['totals']}")

    a = (work / "straight" / "manifest.json").read_bytes()
    b = (work / "resumed" / "manifest.json").read_bytes()
    print(f"manifests byte-identical: {a == b}")
    print(f"artifacts under {work}")


if __name__ == "__main__":
    main()
