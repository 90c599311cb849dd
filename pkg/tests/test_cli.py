"""Command-line interface: exit codes, JSON output, and file side effects.

Most tests drive main() in-process for speed; one subprocess test proves
the module entry point works outside the test harness.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest
from conftest import make_sketch

from sketch2print import DataStore
from sketch2print.cli import main
from sketch2print.mesh import read_stl, uv_sphere, write_ply


@pytest.fixture
def data_dir(tmp_path):
    return tmp_path / "data"


@pytest.fixture
def sketch_file(tmp_path):
    path = tmp_path / "sketch.png"
    path.write_bytes(make_sketch(0))
    return path


def make_cli(data_dir, capsys):
    """Returns run(*args) -> (exit_code, stdout, stderr)."""

    def run(*args, json_out=True):
        argv = ["--data-dir", str(data_dir)]
        if json_out:
            argv.append("--json")
        argv.extend(str(a) for a in args)
        code = main(argv)
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


def run_json(cli, *args):
    code, out, err = cli(*args)
    assert code == 0, err
    return json.loads(out)


# --- argparse behavior ---------------------------------------------------------


def test_no_arguments_is_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["flatten"])
    assert excinfo.value.code == 2


def test_module_entry_point_runs(tmp_path, sketch_file):
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "sketch2print.cli",
            "--data-dir",
            str(tmp_path / "data"),
            "--json",
            "route",
            "run",
            str(sketch_file),
            "--route",
            "sketch-direct",
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert json.loads(result.stdout)["route"] == "sketch_direct"


# --- session lifecycle -----------------------------------------------------------


def test_session_lifecycle_files_and_exit_codes(
    data_dir, sketch_file, tmp_path, capsys
):
    cli = make_cli(data_dir, capsys)

    session = run_json(cli, "session", "new", sketch_file, "--note", "a mug")
    sid = session["id"]
    assert session["stage"] == "Created"
    assert session["user_note"] == "a mug"

    described = run_json(cli, "session", "describe", sid)
    assert described["description"]
    assert described["revision"]["index"] == 1

    out_dir = tmp_path / "pngs"
    images = run_json(cli, "session", "images", sid, "--out", out_dir)
    assert len(images["images"]) == 4
    files = sorted(out_dir.glob(f"{sid[:8]}-it1-*.png"))
    assert [p.name for p in files] == [f"{sid[:8]}-it1-{i}.png" for i in range(4)]
    for path in files:
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    feedback = run_json(
        cli, "session", "feedback", sid, "--text", "rounder", "--out", out_dir
    )
    assert feedback["iteration"]["index"] == 2
    assert feedback["iteration"]["prompt"]["text"].endswith(" rounder")
    assert len(sorted(out_dir.glob(f"{sid[:8]}-it2-*.png"))) == 4

    run_json(cli, "session", "select-image", sid, "--index", 0)

    meshes = run_json(cli, "session", "mesh", sid)
    backends = [c["backend"] for c in meshes["candidates"]]
    assert backends == ["prim-clean", "prim-dupes", "prim-fragments", "prim-holes"]

    run_json(cli, "session", "select-mesh", sid, "--index", 3)

    post = run_json(cli, "session", "postprocess", sid)
    assert post["report"]["printable"] is True

    stl_path = tmp_path / "final.stl"
    exported = run_json(cli, "session", "export", sid, "--out", stl_path)
    data = stl_path.read_bytes()
    assert len(data) >= 134 and (len(data) - 84) % 50 == 0
    assert exported["stl_blob"]

    shown = run_json(cli, "session", "show", sid)
    assert shown["stage"] == "Exported"
    # Re-export after Exported reuses the stored blob.
    again = run_json(cli, "session", "export", sid, "--out", tmp_path / "again.stl")
    assert again["stl_blob"] == exported["stl_blob"]
    assert (tmp_path / "again.stl").read_bytes() == data


def test_flagged_selection_exits_2(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    sid = run_json(cli, "session", "new", sketch_file)["id"]
    run_json(cli, "session", "describe", sid)
    run_json(cli, "session", "images", sid, "--out", data_dir / "pngs")

    code, _, err = cli(
        "session", "select-image", sid, "--index", 1, "--flags", "0,1,0,0"
    )
    assert code == 2
    assert "error[TextFlaggedImage]" in err


def test_out_of_order_operation_exits_4(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    sid = run_json(cli, "session", "new", sketch_file)["id"]
    code, _, err = cli("session", "select-mesh", sid, "--index", 0)
    assert code == 4
    assert "error[InvalidState]" in err


def test_provider_safety_rejection_exits_3(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    sid = run_json(cli, "session", "new", sketch_file, "--note", "do-not-render")[
        "id"
    ]
    code, _, err = cli("session", "describe", sid)
    assert code == 3
    assert "error[SafetyRejected]" in err


def test_unknown_session_exits_2(data_dir, capsys):
    cli = make_cli(data_dir, capsys)
    code, _, err = cli("session", "show", "not-a-session")
    assert code == 2
    assert "error[NotFound]" in err


def test_missing_sketch_file_exits_2(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    code, _, err = cli("session", "new", tmp_path / "absent.png")
    assert code == 2
    assert "error[MissingFile]" in err


# --- routes -------------------------------------------------------------------------


def test_route_run_full_offline(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    record = run_json(cli, "route", "run", sketch_file, "--route", "full")
    assert record["route"] == "full"
    assert len(record["image_blobs"]) == 4
    assert record["final_report"]["printable"] is True
    assert record["stl_blob"]


def test_route_run_sketch_direct_with_defect_backend(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    record = run_json(
        cli,
        "route",
        "run",
        sketch_file,
        "--route",
        "sketch-direct",
        "--backends",
        "prim-holes",
    )
    assert record["final_report"]["printable"] is False


def test_route_seed_controls_outputs(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    one = run_json(cli, "--seed", 7, "route", "run", sketch_file, "--route", "full")
    two = run_json(cli, "--seed", 7, "route", "run", sketch_file, "--route", "full")
    other = run_json(cli, "--seed", 8, "route", "run", sketch_file, "--route", "full")
    assert one["image_blobs"] == two["image_blobs"]
    assert one["image_blobs"] != other["image_blobs"]


# --- metrics -------------------------------------------------------------------------


def write_image_corpus(root: Path, sketches: int, images_each: int):
    root.mkdir(parents=True, exist_ok=True)
    records = []
    counter = 0
    for i in range(sketches):
        sketch_name = f"sk{i}.png"
        (root / sketch_name).write_bytes(make_sketch(seed=i))
        images = []
        for _ in range(images_each):
            name = f"img{counter}.png"
            (root / name).write_bytes(make_sketch(seed=100 + counter))
            images.append(name)
            counter += 1
        records.append(
            {
                "id": f"r{i}",
                "sketch": sketch_name,
                "description": f"sample {i}",
                "images": images,
            }
        )
    return records


def test_metrics_alignment_from_files(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    corpus = tmp_path / "corpus"
    records = write_image_corpus(corpus, 3, 2)
    spec = corpus / "records.json"
    spec.write_text(json.dumps({"records": records}))

    csv_path = tmp_path / "rows.csv"
    payload = run_json(cli, "metrics", "alignment", spec, "--csv", csv_path)
    assert set(payload["corpus_means"]) == {"sketch_text", "image_text", "sketch_image"}
    assert len(payload["rows"]) == 3

    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("record_id")
    assert len(lines) == 4


def test_metrics_diversity_percentiles(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    corpus = tmp_path / "corpus"
    records = write_image_corpus(corpus, 5, 3)
    spec = corpus / "sets.json"
    spec.write_text(
        json.dumps(
            {"sets": [{"id": r["id"], "images": r["images"]} for r in records]}
        )
    )

    payload = run_json(cli, "metrics", "diversity", spec)
    assert [e["percentile"] for e in payload["exemplars"]] == [5, 50, 95]

    custom = run_json(cli, "metrics", "diversity", spec, "--percentiles", "50")
    assert [e["percentile"] for e in custom["exemplars"]] == [50]


def test_metrics_bad_json_exits_2(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    code, _, err = cli("metrics", "alignment", bad)
    assert code == 2
    assert "error[BadJson]" in err


# --- dataset --------------------------------------------------------------------------


def write_manifest(root: Path, count: int, images_per_sketch: int = 2) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        name = f"s{i}.png"
        (root / name).write_bytes(make_sketch(seed=i))
        entries.append({"sketch": name})
    path = root / "manifest.json"
    path.write_text(
        json.dumps({"entries": entries, "images_per_sketch": images_per_sketch})
    )
    return path


def test_dataset_validate_build_resume(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    manifest = write_manifest(tmp_path / "corpus", 3)

    report = run_json(cli, "dataset", "validate", manifest)
    assert report["ok"] is True

    out = tmp_path / "built"
    built = run_json(cli, "dataset", "build", manifest, "--out", out)
    assert built["totals"] == {"sketch_count": 3, "image_count": 6}

    # Interrupted build leaves no manifest; resume completes it.
    out2 = tmp_path / "resumed"
    partial = run_json(cli, "dataset", "build", manifest, "--out", out2, "--limit", 1)
    assert partial["records"] == 1
    assert not (out2 / "manifest.json").exists()
    resumed = run_json(cli, "dataset", "resume", manifest, "--out", out2)
    assert resumed["totals"] == built["totals"]
    assert (out2 / "manifest.json").read_bytes() == (
        out / "manifest.json"
    ).read_bytes()


def test_dataset_validate_missing_file_exits_2(data_dir, tmp_path, capsys):
    cli = make_cli(data_dir, capsys)
    manifest = write_manifest(tmp_path / "corpus", 2)
    (tmp_path / "corpus" / "s1.png").unlink()
    code, out, _ = cli("dataset", "validate", manifest)
    assert code == 2
    assert json.loads(out)["ok"] is False


# --- mesh tools -----------------------------------------------------------------------


@pytest.fixture
def holey_ply(tmp_path):
    """A sphere with two triangles removed, saved as binary PLY."""
    sphere = uv_sphere(rings=9, segments=12)
    broken = type(sphere)(
        vertices=sphere.vertices, triangles=sphere.triangles[:-2]
    )
    path = tmp_path / "holey.ply"
    path.write_bytes(write_ply(broken, binary=True))
    return path


def test_mesh_analyze_repair_convert(data_dir, tmp_path, holey_ply, capsys):
    cli = make_cli(data_dir, capsys)

    before = run_json(cli, "mesh", "analyze", holey_ply)
    assert before["printable"] is False
    assert before["boundary_edge_count"] > 0

    fixed = tmp_path / "fixed.stl"
    repaired = run_json(cli, "mesh", "repair", holey_ply, "--out", fixed)
    assert repaired["report"]["printable"] is True

    after = run_json(cli, "mesh", "analyze", fixed)
    assert after["printable"] is True
    assert after["boundary_edge_count"] == 0

    converted = tmp_path / "converted.stl"
    result = run_json(cli, "mesh", "convert", holey_ply, "--out", converted)
    soup = read_stl(converted.read_bytes())
    assert len(soup.triangles) == result["triangles"]

    code, _, err = cli("mesh", "convert", holey_ply, "--out", tmp_path / "x.ply")
    assert code == 2
    assert "error[Validation]" in err


def test_mesh_repair_flags_are_honored(data_dir, tmp_path, holey_ply, capsys):
    cli = make_cli(data_dir, capsys)
    out = tmp_path / "unfilled.stl"
    result = run_json(
        cli, "mesh", "repair", holey_ply, "--out", out, "--no-fill-holes"
    )
    assert result["report"]["printable"] is False
    assert result["report"]["boundary_edge_count"] > 0


# --- store ----------------------------------------------------------------------------


def test_store_gc_dry_run_then_delete(data_dir, sketch_file, capsys):
    cli = make_cli(data_dir, capsys)
    sid = run_json(cli, "session", "new", sketch_file)["id"]
    orphan = DataStore(data_dir).blobs.put(b"orphaned bytes")

    dry = run_json(cli, "store", "gc", "--dry-run")
    assert dry["would_delete"] == [orphan]
    assert DataStore(data_dir).blobs.get(orphan) == b"orphaned bytes"

    real = run_json(cli, "store", "gc")
    assert real["deleted"] == [orphan]
    # The session's own sketch blob survives.
    assert run_json(cli, "session", "show", sid)["sketch_blob"]
