"""Batch corpus builder: totals, resumability, and failure accounting.

The resume contract is the interesting part: an interrupted build plus a
resume must produce the same manifest bytes as one uninterrupted run, and
failed records get exactly one retry before they are left failed for good.
"""

import json
from pathlib import Path

import pytest
from conftest import make_sketch

from sketch2print import (
    DatasetBuilder,
    HistogramEmbedder,
    load_source_manifest,
    validate,
)
from sketch2print.dataset import SourceEntry, SourceManifest
from sketch2print.errors import (
    EmptyManifest,
    FingerprintMismatch,
    OutputDirUnwritable,
    ProviderError,
    ProviderErrorKind,
    ValidationError,
)
from sketch2print.gateway import Gateway
from sketch2print.gateway.mock import (
    MockDescriber,
    MockSketchGuided,
    MockTextToImage,
    mock_mesh_backends,
)
from sketch2print.store import BlobStore, sha256_hex


def write_corpus(root: Path, count: int, images_per_sketch: int = 4) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        name = f"sketch-{i:02d}.png"
        (root / name).write_bytes(make_sketch(seed=i))
        entries.append({"sketch": name, "description": f"corpus item {i}"})
    manifest_path = root / "sources.json"
    manifest_path.write_text(
        json.dumps(
            {"entries": entries, "images_per_sketch": images_per_sketch, "seed": 0}
        ),
        encoding="utf-8",
    )
    return manifest_path


class SelectiveDescriber:
    """Delegates to the mock describer but fails for chosen sketches."""

    def __init__(self, seed: int, bad_digests: set[str]):
        self.inner = MockDescriber(seed)
        self.bad_digests = set(bad_digests)
        self.healed = False

    def describe(self, sketch: bytes, note: str = ""):
        if not self.healed and sha256_hex(sketch) in self.bad_digests:
            raise ProviderError(ProviderErrorKind.UNAVAILABLE, "synthetic outage")
        return self.inner.describe(sketch, note)


def gateway_with(describer, seed: int = 0) -> Gateway:
    # No-op sleep so retry backoff does not slow the suite down.
    return Gateway(
        describer,
        MockTextToImage(seed),
        MockSketchGuided(seed),
        mock_mesh_backends(seed),
        sleep=lambda _: None,
    )


def make_builder(workers: int = 4, describer=None) -> DatasetBuilder:
    describer = describer or MockDescriber(0)
    return DatasetBuilder(gateway_with(describer), HistogramEmbedder(), workers=workers)


# --- source manifest and validation ------------------------------------------


def test_load_source_manifest_resolves_relative_paths(tmp_path):
    path = write_corpus(tmp_path / "corpus", 3)
    source = load_source_manifest(path)
    assert len(source.entries) == 3
    assert source.images_per_sketch == 4
    assert source.base_dir == path.parent
    assert source.path_of(source.entries[0]).exists()


def test_images_per_sketch_must_be_positive():
    with pytest.raises(ValidationError):
        SourceManifest(entries=[SourceEntry("a.png")], images_per_sketch=0)


def test_validate_clean_corpus_is_ok(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 4))
    report = validate(source)
    assert report.ok
    assert report.entry_count == 4
    assert report.to_dict()["issues"] == []


def test_validate_reports_missing_and_undecodable_files(tmp_path):
    path = write_corpus(tmp_path / "corpus", 3)
    (tmp_path / "corpus" / "sketch-01.png").unlink()
    (tmp_path / "corpus" / "sketch-02.png").write_bytes(b"not a png at all")
    report = validate(load_source_manifest(path))
    assert not report.ok
    by_index = {issue.index: issue.kind for issue in report.issues}
    assert by_index == {1: "MissingFile", 2: "UnsupportedImage"}


def test_validate_flags_empty_manifest(tmp_path):
    report = validate(SourceManifest(entries=[], base_dir=tmp_path))
    assert [issue.kind for issue in report.issues] == ["EmptyManifest"]
    assert report.issues[0].index is None


def test_fingerprint_tracks_file_contents(tmp_path):
    path = write_corpus(tmp_path / "corpus", 2)
    source = load_source_manifest(path)
    before = source.fingerprint()
    assert before == source.fingerprint()
    (tmp_path / "corpus" / "sketch-00.png").write_bytes(make_sketch(seed=99))
    assert source.fingerprint() != before


# --- full build ----------------------------------------------------------------


def test_build_twenty_five_sketches_totals(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 25))
    out = tmp_path / "out"
    manifest = make_builder().build(source, out)

    assert manifest["totals"] == {"sketch_count": 25, "image_count": 100}
    assert [r["index"] for r in manifest["records"]] == list(range(25))

    blobs = BlobStore(out / "blobs")
    for record in manifest["records"]:
        assert record["status"] == "complete"
        assert "attempts" not in record
        assert record["description"]
        assert record["generation_prompt"]
        assert len(record["image_blobs"]) == 4
        for digest in record["image_blobs"]:
            assert blobs.get(digest)[:8] == b"\x89PNG\r\n\x1a\n"
        assert set(record["metrics"]) == {
            "image_text_mean",
            "sketch_image_mean",
            "pairwise_diversity",
        }

    on_disk = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk == manifest


def test_journal_starts_with_fingerprint_and_keeps_attempts(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 3))
    out = tmp_path / "out"
    make_builder().build(source, out)
    lines = (out / "journal.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"fingerprint": source.fingerprint()}
    assert len(lines) == 4
    for line in lines[1:]:
        assert json.loads(line)["attempts"] == 1


def test_build_rejects_empty_manifest(tmp_path):
    with pytest.raises(EmptyManifest):
        make_builder().build(SourceManifest(entries=[]), tmp_path / "out")


def test_build_rejects_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "occupied"
    blocker.write_bytes(b"")
    with pytest.raises(OutputDirUnwritable):
        make_builder().build(
            load_source_manifest(write_corpus(tmp_path / "corpus", 1)), blocker
        )


def test_worker_count_does_not_change_manifest_bytes(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 8))
    make_builder(workers=1).build(source, tmp_path / "serial")
    make_builder(workers=6).build(source, tmp_path / "parallel")
    assert (tmp_path / "serial" / "manifest.json").read_bytes() == (
        tmp_path / "parallel" / "manifest.json"
    ).read_bytes()


# --- interruption and resume -----------------------------------------------------


def test_interrupted_build_plus_resume_is_byte_identical(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 25))

    reference = tmp_path / "straight"
    make_builder().build(source, reference)

    out = tmp_path / "resumed"
    partial = make_builder().build(source, out, limit=10)
    assert partial == {"fingerprint": source.fingerprint(), "records": 10}
    assert not (out / "manifest.json").exists()

    resumed = make_builder().resume(source, out)
    assert resumed["totals"] == {"sketch_count": 25, "image_count": 100}
    assert (out / "manifest.json").read_bytes() == (
        reference / "manifest.json"
    ).read_bytes()


def test_resume_skips_completed_records(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 6))
    out = tmp_path / "out"
    make_builder().build(source, out, limit=4)
    journal_lines = len((out / "journal.jsonl").read_text().splitlines())
    assert journal_lines == 5
    make_builder().resume(source, out)
    # Only the two unfinished records were rebuilt.
    assert len((out / "journal.jsonl").read_text().splitlines()) == 7


def test_resume_survives_torn_journal_line(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 5))
    reference = tmp_path / "straight"
    make_builder().build(source, reference)

    out = tmp_path / "torn"
    make_builder().build(source, out, limit=3)
    journal = out / "journal.jsonl"
    raw = journal.read_bytes()
    journal.write_bytes(raw[:-20])
    make_builder().resume(source, out)
    assert (out / "manifest.json").read_bytes() == (
        reference / "manifest.json"
    ).read_bytes()


def test_resume_requires_journal(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 2))
    with pytest.raises(FingerprintMismatch):
        make_builder().resume(source, tmp_path / "never-built")


def test_resume_rejects_edited_sources(tmp_path):
    path = write_corpus(tmp_path / "corpus", 4)
    source = load_source_manifest(path)
    out = tmp_path / "out"
    make_builder().build(source, out, limit=2)
    (tmp_path / "corpus" / "sketch-03.png").write_bytes(make_sketch(seed=77))
    with pytest.raises(FingerprintMismatch):
        make_builder().resume(load_source_manifest(path), out)


# --- failure injection --------------------------------------------------------------


def bad_digests_for(source: SourceManifest, indices: list[int]) -> set[str]:
    return {
        sha256_hex(source.path_of(source.entries[i]).read_bytes()) for i in indices
    }


def test_injected_failures_mark_exactly_those_records(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 25))
    describer = SelectiveDescriber(0, bad_digests_for(source, [3, 17]))
    manifest = make_builder(describer=describer).build(source, tmp_path / "out")

    failed = [r["index"] for r in manifest["records"] if r["status"] == "failed"]
    assert failed == [3, 17]
    for index in failed:
        record = manifest["records"][index]
        assert record["error"]["kind"] == "Unavailable"
        assert "image_blobs" not in record
    assert manifest["totals"] == {"sketch_count": 23, "image_count": 92}


def test_resume_retries_failures_once_and_heals(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 10))
    reference = tmp_path / "straight"
    make_builder().build(source, reference)

    out = tmp_path / "out"
    describer = SelectiveDescriber(0, bad_digests_for(source, [2, 8]))
    builder = make_builder(describer=describer)
    first = builder.build(source, out)
    assert first["totals"]["sketch_count"] == 8

    describer.healed = True
    healed = builder.resume(source, out)
    assert healed["totals"] == {"sketch_count": 10, "image_count": 40}
    # Retried records converge on the same bytes as a clean one-shot build.
    assert (out / "manifest.json").read_bytes() == (
        reference / "manifest.json"
    ).read_bytes()


def test_failed_records_get_exactly_one_retry(tmp_path):
    source = load_source_manifest(write_corpus(tmp_path / "corpus", 5))
    describer = SelectiveDescriber(0, bad_digests_for(source, [1]))
    builder = make_builder(describer=describer)
    out = tmp_path / "out"
    builder.build(source, out)
    journal = out / "journal.jsonl"

    builder.resume(source, out)
    lines = journal.read_text(encoding="utf-8").splitlines()
    retried = [json.loads(l) for l in lines[1:] if json.loads(l)["index"] == 1]
    assert [r["attempts"] for r in retried] == [1, 2]

    # A second resume must not burn more attempts on a dead record.
    manifest = builder.resume(source, out)
    assert len(journal.read_text(encoding="utf-8").splitlines()) == len(lines)
    assert manifest["records"][1]["status"] == "failed"
    assert manifest["totals"]["sketch_count"] == 4
