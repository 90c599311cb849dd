"""Batch builder: sketch corpus in, description + n images per sketch out.

Layout under out_dir:

    blobs/          content-addressed sketches and images
    journal.jsonl   fingerprint line, then one line per finished record
    manifest.json   atomic, timestamp-free summary (byte-stable to rebuild)

The journal makes interrupted runs resumable; the manifest is written only
at the end, from the journal, sorted by source order, so an interrupted
run plus a resume produces the same bytes as one uninterrupted run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    EmptyManifest,
    FingerprintMismatch,
    OutputDirUnwritable,
    ProviderError,
    UnsupportedImage,
    ValidationError,
)
from .gateway import Gateway, require_raster
from .metrics import Embedder, clip_score, pairwise_diversity
from .store import BlobStore, sha256_hex

logger = logging.getLogger(__name__)

MAX_ATTEMPTS_PER_RECORD = 2

# Journal-only bookkeeping, stripped before manifest assembly.
_JOURNAL_ONLY_FIELDS = ("attempts",)


@dataclass
class SourceEntry:
    sketch: str
    description: str = ""

    def to_dict(self) -> dict:
        return {"sketch": self.sketch, "description": self.description}


@dataclass
class SourceManifest:
    entries: list[SourceEntry]
    images_per_sketch: int = 4
    seed: int = 0
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.images_per_sketch < 1:
            raise ValidationError("images_per_sketch must be positive")

    def path_of(self, entry: SourceEntry) -> Path:
        return self.base_dir / entry.sketch

    def fingerprint(self) -> str:
        """Hash of entries, options, and sketch file contents."""
        body = {
            "images_per_sketch": self.images_per_sketch,
            "seed": self.seed,
            "entries": [
                {
                    **e.to_dict(),
                    "sketch_sha256": self._file_hash(self.path_of(e)),
                }
                for e in self.entries
            ],
        }
        canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @staticmethod
    def _file_hash(path: Path) -> str:
        try:
            return sha256_hex(path.read_bytes())
        except OSError:
            return "missing"


def load_source_manifest(path: str | Path) -> SourceManifest:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    entries = [
        SourceEntry(e["sketch"], e.get("description", ""))
        for e in raw.get("entries", [])
    ]
    return SourceManifest(
        entries=entries,
        images_per_sketch=raw.get("images_per_sketch", 4),
        seed=raw.get("seed", 0),
        base_dir=path.parent,
    )


@dataclass
class ValidationIssue:
    index: int | None
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {"index": self.index, "kind": self.kind, "detail": self.detail}


@dataclass
class ValidationReport:
    entry_count: int
    issues: list[ValidationIssue]

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "entry_count": self.entry_count,
            "ok": self.ok,
            "issues": [i.to_dict() for i in self.issues],
        }


def validate(source: SourceManifest) -> ValidationReport:
    """Check every entry exists and decodes; reports, never raises."""
    issues = []
    if not source.entries:
        issues.append(
            ValidationIssue(None, EmptyManifest.kind, "manifest has no entries")
        )
    for i, entry in enumerate(source.entries):
        path = source.path_of(entry)
        try:
            require_raster(path.read_bytes(), f"entry {i}")
        except FileNotFoundError:
            issues.append(ValidationIssue(i, "MissingFile", str(path)))
        except UnsupportedImage as exc:
            issues.append(ValidationIssue(i, exc.kind, exc.detail))
        except OSError as exc:
            issues.append(ValidationIssue(i, "IoFailure", f"{path}: {exc}"))
    return ValidationReport(len(source.entries), issues)


class DatasetBuilder:
    """Runs the corpus through describe + images with bounded workers."""

    def __init__(self, gateway: Gateway, embedder: Embedder, workers: int = 4):
        self.gateway = gateway
        self.embedder = embedder
        self.workers = max(1, workers)

    # --- public entry points -------------------------------------------------

    def build(
        self,
        source: SourceManifest,
        out_dir: str | Path,
        *,
        limit: int | None = None,
    ) -> dict:
        """Fresh build. `limit` stops after that many records (no manifest),
        which is how tests simulate an interruption."""
        if not source.entries:
            raise EmptyManifest("manifest has no entries")
        out = self._prepare_out_dir(out_dir)
        journal = out / "journal.jsonl"
        if journal.exists():
            journal.unlink()
        self._write_journal_line(
            journal, {"fingerprint": source.fingerprint()}, lock=threading.Lock()
        )
        return self._run(source, out, done={}, limit=limit)

    def resume(
        self,
        source: SourceManifest,
        out_dir: str | Path,
        *,
        limit: int | None = None,
    ) -> dict:
        """Finish an interrupted build; failed records are retried once."""
        out = self._prepare_out_dir(out_dir)
        journal = out / "journal.jsonl"
        if not journal.exists():
            raise FingerprintMismatch(f"no journal in {out}")
        fingerprint, done = self._read_journal(journal)
        if fingerprint != source.fingerprint():
            raise FingerprintMismatch(
                "source manifest changed since the journal was started"
            )
        return self._run(source, out, done=done, limit=limit)

    # --- internals -----------------------------------------------------------

    @staticmethod
    def _prepare_out_dir(out_dir: str | Path) -> Path:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".writable"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise OutputDirUnwritable(f"{out}: {exc}") from exc
        return out

    @staticmethod
    def _write_journal_line(journal: Path, record: dict, lock: threading.Lock) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with lock:
            with open(journal, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())

    @staticmethod
    def _read_journal(journal: Path) -> tuple[str, dict[int, dict]]:
        lines = journal.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise FingerprintMismatch("journal is empty")
        header = json.loads(lines[0])
        done: dict[int, dict] = {}
        for line in lines[1:]:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("dropping torn journal line")
                continue
            done[record["index"]] = record
        return header.get("fingerprint", ""), done

    def _run(
        self,
        source: SourceManifest,
        out: Path,
        done: dict[int, dict],
        limit: int | None,
    ) -> dict:
        journal = out / "journal.jsonl"
        blobs = BlobStore(out / "blobs")
        journal_lock = threading.Lock()

        pending = []
        for i, entry in enumerate(source.entries):
            prior = done.get(i)
            if prior is None:
                pending.append((i, entry, 0))
            elif (
                prior["status"] == "failed"
                and prior.get("attempts", 1) < MAX_ATTEMPTS_PER_RECORD
            ):
                pending.append((i, entry, prior.get("attempts", 1)))
        if limit is not None:
            pending = pending[:limit]

        def work(item: tuple[int, SourceEntry, int]) -> None:
            index, entry, attempts = item
            record = self._build_record(index, entry, source, blobs)
            record["attempts"] = attempts + 1
            done[index] = record
            self._write_journal_line(journal, record, journal_lock)

        if pending:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(work, pending))

        if limit is not None and len(done) < len(source.entries):
            # Interrupted on purpose; no manifest yet.
            return {"fingerprint": source.fingerprint(), "records": len(done)}
        return self._write_manifest(source, out, done)

    def _build_record(
        self, index: int, entry: SourceEntry, source: SourceManifest, blobs: BlobStore
    ) -> dict:
        base = {"index": index, "sketch_path": entry.sketch}
        try:
            sketch = source.path_of(entry).read_bytes()
            require_raster(sketch, entry.sketch)
            base["sketch_sha256"] = blobs.put(sketch)
            described = self.gateway.describe(sketch, entry.description)
            images = self.gateway.text_to_images(
                described.generation_prompt, source.images_per_sketch
            )
            image_blobs = [blobs.put(img.data) for img in images]
            metrics = self._record_metrics(
                sketch, described.description, [img.data for img in images]
            )
            return {
                **base,
                "status": "complete",
                "description": described.description,
                "generation_prompt": described.generation_prompt,
                "image_blobs": image_blobs,
                "metrics": metrics,
            }
        except (ProviderError, UnsupportedImage, OSError) as exc:
            kind = getattr(exc, "kind", type(exc).__name__)
            detail = getattr(exc, "detail", str(exc))
            return {**base, "status": "failed", "error": {"kind": kind, "detail": detail}}

    def _record_metrics(
        self, sketch: bytes, description: str, images: list[bytes]
    ) -> dict:
        sketch_vec = self.embedder.embed_image(sketch)
        text_vec = self.embedder.embed_text(description)
        image_vecs = [self.embedder.embed_image(i) for i in images]
        image_text = sum(clip_score(v, text_vec).value for v in image_vecs) / len(
            image_vecs
        )
        sketch_image = sum(clip_score(v, sketch_vec).value for v in image_vecs) / len(
            image_vecs
        )
        diversity = (
            pairwise_diversity(image_vecs).value if len(image_vecs) >= 2 else None
        )
        return {
            "image_text_mean": image_text,
            "sketch_image_mean": sketch_image,
            "pairwise_diversity": diversity,
        }

    def _write_manifest(
        self, source: SourceManifest, out: Path, done: dict[int, dict]
    ) -> dict:
        records = []
        for i in range(len(source.entries)):
            record = dict(done[i])
            for key in _JOURNAL_ONLY_FIELDS:
                record.pop(key, None)
            records.append(record)
        complete = [r for r in records if r["status"] == "complete"]
        manifest = {
            "fingerprint": source.fingerprint(),
            "images_per_sketch": source.images_per_sketch,
            "seed": source.seed,
            "records": records,
            "totals": {
                "sketch_count": len(complete),
                "image_count": len(complete) * source.images_per_sketch,
            },
        }
        payload = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        fd, tmp = tempfile.mkstemp(dir=out, prefix=".manifest-")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, out / "manifest.json")
        return manifest
