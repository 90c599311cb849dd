"""HTTP service: route surface, job polling, error mapping, artifacts.

All tests run against an in-process app with the mock gateway; nothing
binds a real socket.
"""

import base64
import hashlib
import json
import threading
import time

import pytest
from conftest import make_sketch
from fastapi.testclient import TestClient

from sketch2print import DataStore, HistogramEmbedder, PipelineService
from sketch2print.config import AppConfig
from sketch2print.errors import (
    AllBackendsFailed,
    CorruptLog,
    InvalidState,
    MeshParseError,
    NotFound,
    ProviderError,
    ProviderErrorKind,
    SequenceConflict,
    UnsupportedImage,
    ValidationError,
)
from sketch2print.gateway import Gateway
from sketch2print.gateway.mock import (
    SAFETY_TRIGGER,
    MockDescriber,
    MockSketchGuided,
    MockTextToImage,
    mock_mesh_backends,
)
from sketch2print.service import create_app, error_mapping, route_table

ROUTES = [
    "GET /blobs/{blob_hash}",
    "GET /datasets/{dataset_id}/blobs/{blob_hash}",
    "GET /datasets/{dataset_id}/manifest",
    "GET /healthz",
    "GET /jobs/{job_id}",
    "GET /sessions/{session_id}",
    "GET /sessions/{session_id}/export.stl",
    "PATCH /sessions/{session_id}/description",
    "POST /datasets",
    "POST /datasets/{dataset_id}/diversity",
    "POST /metrics/alignment",
    "POST /metrics/diversity",
    "POST /sessions",
    "POST /sessions/{session_id}/describe",
    "POST /sessions/{session_id}/feedback",
    "POST /sessions/{session_id}/images",
    "POST /sessions/{session_id}/mesh",
    "POST /sessions/{session_id}/postprocess",
    "POST /sessions/{session_id}/select-image",
    "POST /sessions/{session_id}/select-mesh",
]


@pytest.fixture
def config(tmp_path):
    return AppConfig(data_dir=str(tmp_path / "data"))


@pytest.fixture
def client(config):
    with TestClient(create_app(config)) as client:
        yield client


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_session(client, sketch=None, note=""):
    response = client.post(
        "/sessions", json={"sketch_b64": b64(sketch or make_sketch(0)), "user_note": note}
    )
    assert response.status_code == 201, response.text
    return response.json()


def poll(client, job: dict, timeout: float = 30.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        state = client.get(f"/jobs/{job['id']}")
        assert state.status_code == 200, state.text
        payload = state.json()
        if payload["state"] in ("succeeded", "failed"):
            return payload
        time.sleep(0.005)
    raise AssertionError(f"job {job['id']} never finished")


def run_job(client, response, timeout: float = 30.0) -> dict:
    assert response.status_code == 202, response.text
    job = poll(client, response.json(), timeout)
    assert job["state"] == "succeeded", job
    return job["result"]


# --- surface ----------------------------------------------------------------


def test_route_table_is_exactly_the_declared_api(config):
    assert route_table(create_app(config)) == ROUTES


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok", "mode": "mock"}


# --- session lifecycle over HTTP ----------------------------------------------


def test_full_lifecycle_over_http(client):
    sketch = make_sketch(0)
    session = create_session(client, sketch)
    sid = session["id"]
    assert session["stage"] == "Created"
    assert session["version"] == 1

    described = run_job(client, client.post(f"/sessions/{sid}/describe"))
    assert described["revision"]["index"] == 1
    assert described["description"]

    images = run_job(client, client.post(f"/sessions/{sid}/images", json={"count": 4}))
    assert len(images["images"]) == 4

    selected = client.post(f"/sessions/{sid}/select-image", json={"index": 0})
    assert selected.status_code == 200
    assert selected.json()["stage"] == "ImageSelected"

    meshes = run_job(client, client.post(f"/sessions/{sid}/mesh"))
    assert [c["backend"] for c in meshes["candidates"]] == [
        "prim-clean",
        "prim-dupes",
        "prim-fragments",
        "prim-holes",
    ]
    assert meshes["failures"] == []

    assert (
        client.post(f"/sessions/{sid}/select-mesh", json={"index": 0}).status_code
        == 200
    )

    done = run_job(client, client.post(f"/sessions/{sid}/postprocess"))
    assert done["report"]["printable"] is True

    final = client.get(f"/sessions/{sid}").json()
    assert final["stage"] == "Exported"
    assert final["version"] == 8

    stl = client.get(f"/sessions/{sid}/export.stl")
    assert stl.status_code == 200
    assert stl.headers["content-type"].startswith("model/stl")
    assert f'filename="{sid}.stl"' in stl.headers["content-disposition"]
    blob = client.get(f"/blobs/{done['stl_blob']}")
    assert stl.content == blob.content
    assert len(stl.content) >= 134 and (len(stl.content) - 84) % 50 == 0


def test_create_session_from_raw_bytes(client):
    sketch = make_sketch(2)
    response = client.post(
        "/sessions?note=robot arm",
        content=sketch,
        headers={"content-type": "application/octet-stream"},
    )
    assert response.status_code == 201
    body = response.json()
    assert body["user_note"] == "robot arm"
    assert client.get(f"/blobs/{body['sketch_blob']}").content == sketch


def test_edit_description_is_synchronous(client):
    session = create_session(client)
    sid = session["id"]
    run_job(client, client.post(f"/sessions/{sid}/describe"))
    response = client.patch(
        f"/sessions/{sid}/description", json={"text": "a mug with a square handle"}
    )
    assert response.status_code == 200
    assert response.json()["revision"]["text"] == "a mug with a square handle"
    assert response.json()["revision"]["index"] == 2


def test_feedback_job_appends_revised_iteration(client):
    session = create_session(client)
    sid = session["id"]
    run_job(client, client.post(f"/sessions/{sid}/describe"))
    run_job(client, client.post(f"/sessions/{sid}/images"))
    before = client.get(f"/sessions/{sid}").json()
    prompt = before["iterations"][0]["prompt"]["text"]

    result = run_job(
        client,
        client.post(f"/sessions/{sid}/feedback", json={"text": "make it taller"}),
    )
    assert result["iteration"]["prompt"]["text"] == prompt + " make it taller"
    assert len(result["iteration"]["images"]) == 4


# --- error mapping ---------------------------------------------------------------


@pytest.mark.parametrize(
    "exc, status",
    [
        (ProviderError(ProviderErrorKind.SAFETY_REJECTED), 422),
        (ProviderError(ProviderErrorKind.RATE_LIMITED), 429),
        (ProviderError(ProviderErrorKind.TRANSIENT), 502),
        (ProviderError(ProviderErrorKind.UNAVAILABLE), 502),
        (ProviderError(ProviderErrorKind.MALFORMED), 502),
        (ValidationError("bad"), 422),
        (UnsupportedImage("bad"), 422),
        (InvalidState("bad"), 409),
        (SequenceConflict("bad"), 409),
        (NotFound("bad"), 404),
        (AllBackendsFailed("bad"), 502),
        (MeshParseError("bad"), 422),
        (CorruptLog("bad"), 500),
    ],
)
def test_error_mapping_table(exc, status):
    got_status, body = error_mapping(exc)
    assert got_status == status
    assert body == {"error": {"kind": exc.kind, "detail": exc.detail}}


def test_unknown_session_is_404(client):
    for response in (
        client.get("/sessions/nope"),
        client.post("/sessions/nope/describe"),
        client.get("/sessions/nope/export.stl"),
    ):
        assert response.status_code == 404
        assert response.json()["error"]["kind"] == "NotFound"


def test_validation_errors_are_422(client):
    missing = client.post("/sessions", json={})
    assert missing.status_code == 422
    assert missing.json()["error"]["kind"] == "Validation"

    bad_b64 = client.post("/sessions", json={"sketch_b64": "%%%"})
    assert bad_b64.status_code == 422

    not_image = client.post("/sessions", json={"sketch_b64": b64(b"plain text")})
    assert not_image.status_code == 422
    assert not_image.json()["error"]["kind"] == "UnsupportedImage"


def test_malformed_json_body_is_422(client):
    session = create_session(client)
    response = client.post(
        f"/sessions/{session['id']}/select-image",
        content=b"{not json",
        headers={"content-type": "application/json"},
    )
    assert response.status_code == 422
    assert response.json()["error"]["kind"] == "Validation"


def test_non_integer_count_is_422(client):
    session = create_session(client)
    response = client.post(
        f"/sessions/{session['id']}/images", json={"count": "four"}
    )
    assert response.status_code == 422
    assert "count" in response.json()["error"]["detail"]


def test_out_of_order_operation_is_409(client):
    session = create_session(client)
    response = client.post(
        f"/sessions/{session['id']}/select-mesh", json={"index": 0}
    )
    assert response.status_code == 409
    assert response.json()["error"]["kind"] == "InvalidState"


def test_export_before_exported_is_409(client):
    session = create_session(client)
    response = client.get(f"/sessions/{session['id']}/export.stl")
    assert response.status_code == 409


def test_selecting_flagged_image_is_422_and_changes_nothing(client):
    session = create_session(client)
    sid = session["id"]
    run_job(client, client.post(f"/sessions/{sid}/describe"))
    run_job(client, client.post(f"/sessions/{sid}/images"))
    before = client.get(f"/sessions/{sid}").json()

    response = client.post(
        f"/sessions/{sid}/select-image",
        json={"index": 1, "contains_text_flags": [False, True, False, False]},
    )
    assert response.status_code == 422
    assert response.json()["error"]["kind"] == "TextFlaggedImage"
    assert client.get(f"/sessions/{sid}").json() == before


# --- jobs --------------------------------------------------------------------------


def test_job_failure_embeds_error(client):
    session = create_session(client, note=f"please {SAFETY_TRIGGER} this")
    sid = session["id"]
    response = client.post(f"/sessions/{sid}/describe")
    assert response.status_code == 202
    job = poll(client, response.json())
    assert job["state"] == "failed"
    assert job["error"]["kind"] == "SafetyRejected"
    assert job["result"] is None
    # The failed job left the session untouched.
    assert client.get(f"/sessions/{sid}").json()["stage"] == "Created"


def test_unknown_job_is_404(client):
    response = client.get("/jobs/doesnotexist")
    assert response.status_code == 404


class GatedDescriber:
    """Blocks inside describe() until released, to hold a job in flight."""

    def __init__(self, seed: int):
        self.inner = MockDescriber(seed)
        self.entered = threading.Event()
        self.release = threading.Event()

    def describe(self, sketch: bytes, note: str = ""):
        self.entered.set()
        assert self.release.wait(timeout=30)
        return self.inner.describe(sketch, note)


def test_one_job_in_flight_per_session(tmp_path):
    config = AppConfig(data_dir=str(tmp_path / "data"))
    gate = GatedDescriber(0)
    gateway = Gateway(
        gate, MockTextToImage(0), MockSketchGuided(0), mock_mesh_backends(0)
    )
    pipeline = PipelineService(
        DataStore(config.data_dir), gateway, HistogramEmbedder()
    )
    with TestClient(create_app(config, pipeline=pipeline)) as client:
        sid = create_session(client)["id"]
        first = client.post(f"/sessions/{sid}/describe")
        assert first.status_code == 202
        assert gate.entered.wait(timeout=30)

        second = client.post(f"/sessions/{sid}/describe")
        assert second.status_code == 409
        assert "in flight" in second.json()["error"]["detail"]

        gate.release.set()
        assert poll(client, first.json())["state"] == "succeeded"
        # With the slot free the same call is accepted again (then rejected
        # by stage rules, which proves it reached the pipeline).
        retry = client.post(f"/sessions/{sid}/describe")
        assert retry.status_code == 202
        assert poll(client, retry.json())["error"]["kind"] == "InvalidState"


# --- artifacts -----------------------------------------------------------------------


def test_blob_bytes_are_immutable_cacheable(client):
    sketch = make_sketch(5)
    session = create_session(client, sketch)
    response = client.get(f"/blobs/{session['sketch_blob']}")
    assert response.status_code == 200
    assert response.content == sketch
    assert response.headers["content-type"] == "image/png"
    assert response.headers["cache-control"] == "public, max-age=31536000, immutable"

    assert client.get(f"/blobs/{'0' * 64}").status_code == 404
    # Anything that is not a 64-hex digest is NotFound, never a path lookup.
    assert client.get("/blobs/not-a-hash").status_code == 404
    assert client.get("/blobs/..").status_code == 404


# --- datasets ------------------------------------------------------------------------


def write_corpus(root, count):
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        name = f"s{i}.png"
        (root / name).write_bytes(make_sketch(seed=i))
        entries.append({"sketch": name, "description": f"item {i}"})
    return entries


def test_dataset_build_and_manifest_fetch(tmp_path, client):
    corpus = tmp_path / "corpus"
    entries = write_corpus(corpus, 3)
    response = client.post(
        "/datasets",
        json={"entries": entries, "images_per_sketch": 2, "base_dir": str(corpus)},
    )
    assert response.status_code == 202
    body = response.json()
    result = poll(client, body["job"])
    assert result["state"] == "succeeded"
    assert result["result"]["totals"] == {"sketch_count": 3, "image_count": 6}

    manifest = client.get(f"/datasets/{body['dataset_id']}/manifest")
    assert manifest.status_code == 200
    payload = json.loads(manifest.content)
    assert payload["totals"]["sketch_count"] == 3


def test_dataset_validation_failure_is_synchronous_422(tmp_path, client):
    response = client.post(
        "/datasets",
        json={
            "entries": [{"sketch": "missing.png"}],
            "base_dir": str(tmp_path / "empty"),
        },
    )
    assert response.status_code == 422
    assert "MissingFile" in response.json()["error"]["detail"]


def test_unknown_dataset_manifest_is_404(client):
    assert client.get("/datasets/nope/manifest").status_code == 404


def build_dataset(tmp_path, client, count=3, images_per_sketch=2) -> str:
    corpus = tmp_path / "corpus"
    entries = write_corpus(corpus, count)
    response = client.post(
        "/datasets",
        json={
            "entries": entries,
            "images_per_sketch": images_per_sketch,
            "base_dir": str(corpus),
        },
    )
    assert response.status_code == 202
    body = response.json()
    job = poll(client, body["job"])
    assert job["state"] == "succeeded", job
    return body["dataset_id"]


def test_dataset_blobs_served_from_the_dataset_store(tmp_path, client):
    dataset_id = build_dataset(tmp_path, client)
    manifest = json.loads(client.get(f"/datasets/{dataset_id}/manifest").content)
    blob = manifest["records"][0]["image_blobs"][0]

    response = client.get(f"/datasets/{dataset_id}/blobs/{blob}")
    assert response.status_code == 200
    assert hashlib.sha256(response.content).hexdigest() == blob
    assert response.headers["cache-control"] == "public, max-age=31536000, immutable"
    # Dataset artifacts live in the dataset's own store, not the session store.
    assert client.get(f"/blobs/{blob}").status_code == 404


def test_dataset_blob_unknown_hash_or_dataset_is_404(tmp_path, client):
    dataset_id = build_dataset(tmp_path, client)
    assert client.get(f"/datasets/{dataset_id}/blobs/{'0' * 64}").status_code == 404
    assert client.get(f"/datasets/{dataset_id}/blobs/not-a-hash").status_code == 404
    assert client.get(f"/datasets/nope/blobs/{'0' * 64}").status_code == 404


def test_dataset_diversity_agrees_with_build_time_metrics(tmp_path, client):
    dataset_id = build_dataset(tmp_path, client, count=4, images_per_sketch=3)
    response = client.post(
        f"/datasets/{dataset_id}/diversity", json={"percentiles": [5, 50, 95]}
    )
    assert response.status_code == 200
    body = response.json()
    assert [e["percentile"] for e in body["exemplars"]] == [5, 50, 95]
    assert len(body["sets"]) == 4

    manifest = json.loads(client.get(f"/datasets/{dataset_id}/manifest").content)
    by_id = {row["set_id"]: row["score"] for row in body["sets"]}
    for record in manifest["records"]:
        assert by_id[str(record["index"])] == pytest.approx(
            record["metrics"]["pairwise_diversity"]
        )


def test_dataset_diversity_defaults_and_unknown_dataset(tmp_path, client):
    dataset_id = build_dataset(tmp_path, client)
    response = client.post(f"/datasets/{dataset_id}/diversity")
    assert response.status_code == 200
    assert [e["percentile"] for e in response.json()["exemplars"]] == [5, 50, 95]
    assert client.post("/datasets/nope/diversity").status_code == 404


# --- metrics -------------------------------------------------------------------------


@pytest.fixture
def seeded_blobs(config):
    """App plus a handful of pre-stored image blobs to reference by hash."""
    pipeline = None
    app = create_app(config)
    pipeline = app.state.pipeline
    hashes = [pipeline.store.blobs.put(make_sketch(seed=i)) for i in range(8)]
    with TestClient(app) as client:
        yield client, hashes


def test_metrics_alignment_endpoint(seeded_blobs):
    client, hashes = seeded_blobs
    response = client.post(
        "/metrics/alignment",
        json={
            "records": [
                {
                    "id": "r1",
                    "sketch_blob": hashes[0],
                    "description": "a squat mug",
                    "image_blobs": hashes[1:4],
                },
                {
                    "id": "r2",
                    "sketch_blob": hashes[4],
                    "description": "a tall vase",
                    "image_blobs": hashes[5:8],
                },
            ]
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert [row["record_id"] for row in body["rows"]] == ["r1", "r2"]
    assert set(body["corpus_means"]) == {"sketch_text", "image_text", "sketch_image"}


def test_metrics_alignment_unknown_blob_is_404(seeded_blobs):
    client, _ = seeded_blobs
    response = client.post(
        "/metrics/alignment",
        json={
            "records": [
                {
                    "id": "r1",
                    "sketch_blob": "0" * 64,
                    "description": "x",
                    "image_blobs": [],
                }
            ]
        },
    )
    assert response.status_code == 404


def test_metrics_diversity_endpoint(seeded_blobs):
    client, hashes = seeded_blobs
    sets = [
        {"id": f"set{i}", "image_blobs": [hashes[i], hashes[i + 1], hashes[i + 2]]}
        for i in range(5)
    ]
    response = client.post(
        "/metrics/diversity", json={"sets": sets, "percentiles": [5, 50, 95]}
    )
    assert response.status_code == 200
    body = response.json()
    assert [e["percentile"] for e in body["exemplars"]] == [5, 50, 95]
    set_ids = {s["id"] for s in sets}
    assert all(e["set_id"] in set_ids for e in body["exemplars"])
    assert len(body["sets"]) == 5
    assert sum(body["histogram"]["counts"]) == 5
    assert len(body["histogram"]["bin_edges"]) == 21

    bad = client.post(
        "/metrics/diversity", json={"sets": sets, "percentiles": ["high"]}
    )
    assert bad.status_code == 422
