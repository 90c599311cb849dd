"""HTTP facade over sessions, jobs, metrics, datasets, and artifacts.

Slow stage operations run as jobs the client polls; cheap reads and
selections answer synchronously. Every error body has the same shape:
{"error": {"kind": ..., "detail": ...}}.
"""

from __future__ import annotations

import base64
import binascii
import json
import re
import uuid
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import AppConfig, build_embedder, build_gateway, build_store, load_config
from .dataset import DatasetBuilder, SourceEntry, SourceManifest, validate
from .errors import (
    InvalidState,
    NotFound,
    ProviderError,
    Sketch2PrintError,
    ValidationError,
)
from .jobs import JobRunner
from .mesh import RepairPlan
from .metrics import alignment_report, pairwise_diversity, percentile_exemplars
from .pipeline import PipelineService
from .session import Stage
from .store import BlobStore

_PROVIDER_STATUS = {
    "SafetyRejected": 422,
    "RateLimited": 429,
    "Transient": 502,
    "Unavailable": 502,
    "Malformed": 502,
}


def error_mapping(exc: Sketch2PrintError) -> tuple[int, dict]:
    """Core error -> (HTTP status, response body)."""
    if isinstance(exc, ProviderError):
        status = _PROVIDER_STATUS.get(exc.kind, 502)
    elif isinstance(exc, ValidationError):
        status = 422
    elif exc.kind in ("InvalidState", "SequenceConflict"):
        status = 409
    elif exc.kind == "NotFound":
        status = 404
    elif exc.kind in ("AllBackendsFailed",):
        status = 502
    elif exc.kind in ("MeshParseError", "TooManyTriangles", "NonmanifoldBoundary"):
        status = 422
    else:
        status = 500
    return status, {"error": {"kind": exc.kind, "detail": exc.detail}}


def _sniff_content_type(data: bytes) -> str:
    if data.startswith(b"\x89PNG"):
        return "image/png"
    if data.startswith(b"\xff\xd8\xff"):
        return "image/jpeg"
    if data.startswith(b"ply"):
        return "model/ply"
    return "application/octet-stream"


def _require(body: dict, key: str):
    if key not in body:
        raise ValidationError(f"missing field {key!r}")
    return body[key]


async def _json_body(request: Request, required: bool = True) -> dict:
    if not required and not int(request.headers.get("content-length") or 0):
        return {}
    try:
        body = await request.json()
    except Exception as exc:
        raise ValidationError(f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ValidationError("body must be a JSON object")
    return body


def _int_field(body: dict, key: str, default: int) -> int:
    value = body.get(key, default)
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be an integer, got {value!r}") from None


def _require_int(body: dict, key: str) -> int:
    _require(body, key)
    return _int_field(body, key, 0)


def _decode_b64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError, TypeError) as exc:
        raise ValidationError(f"bad base64 in {what}") from exc


_HASH_RE = re.compile(r"[0-9a-f]{64}")


def _require_hash(blob_hash: str) -> str:
    if not _HASH_RE.fullmatch(blob_hash):
        raise NotFound(f"no blob {blob_hash}")
    return blob_hash


def _percentiles(body: dict) -> list[float]:
    try:
        return [float(p) for p in body.get("percentiles", [5, 50, 95])]
    except (TypeError, ValueError):
        raise ValidationError("percentiles must be numbers") from None


def create_app(
    config: AppConfig | None = None,
    *,
    pipeline: PipelineService | None = None,
    runner: JobRunner | None = None,
) -> FastAPI:
    config = config or load_config()
    if pipeline is None:
        pipeline = PipelineService(
            build_store(config), build_gateway(config), build_embedder(config)
        )
    runner = runner or JobRunner(workers=config.service.workers)
    embedder = pipeline.embedder
    store = pipeline.store

    app = FastAPI(title="sketch2print", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.pipeline = pipeline
    app.state.runner = runner
    app.state.config = config
    if config.service.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.service.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(Sketch2PrintError)
    async def _core_error(request: Request, exc: Sketch2PrintError):
        status, body = error_mapping(exc)
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": {"kind": "Validation", "detail": str(exc.errors())}},
        )

    # --- health ------------------------------------------------------------

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "mode": config.mode}

    # --- sessions ------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> dict:
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            body = await _json_body(request)
            sketch = _decode_b64(_require(body, "sketch_b64"), "sketch_b64")
            note = body.get("user_note", "")
        else:
            sketch = await request.body()
            note = request.query_params.get("note", "")
        session = pipeline.create_session(sketch, note)
        return session.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return pipeline.get(session_id).to_dict()

    @app.post("/sessions/{session_id}/describe", status_code=202)
    def describe(session_id: str) -> dict:
        pipeline.get(session_id)

        def run():
            pipeline.advance_describe(session_id)
            state = pipeline.get(session_id)
            return {
                "revision": state.current_revision.to_dict(),
                "description": state.description,
            }

        return runner.submit("describe", run, session_id=session_id).to_dict()

    @app.patch("/sessions/{session_id}/description")
    async def edit_description(session_id: str, request: Request) -> dict:
        body = await _json_body(request)
        revision = pipeline.edit_description(session_id, _require(body, "text"))
        return {"revision": revision.to_dict()}

    @app.post("/sessions/{session_id}/images", status_code=202)
    async def generate_images(session_id: str, request: Request) -> dict:
        body = await _json_body(request, required=False)
        count = _int_field(body, "count", config.count_default)

        def run():
            images = pipeline.advance_images(session_id, count)
            return {"images": [img.to_dict() for img in images]}

        pipeline.get(session_id)
        return runner.submit("images", run, session_id=session_id).to_dict()

    @app.post("/sessions/{session_id}/feedback", status_code=202)
    async def feedback(session_id: str, request: Request) -> dict:
        body = await _json_body(request)
        text = _require(body, "text")
        count = _int_field(body, "count", config.count_default)

        def run():
            iteration = pipeline.append_feedback(session_id, text, count)
            return {"iteration": iteration.to_dict()}

        pipeline.get(session_id)
        return runner.submit("feedback", run, session_id=session_id).to_dict()

    @app.post("/sessions/{session_id}/select-image")
    async def select_image(session_id: str, request: Request) -> dict:
        body = await _json_body(request)
        session = pipeline.select_image(
            session_id,
            _require_int(body, "index"),
            body.get("contains_text_flags"),
        )
        return session.to_dict()

    @app.post("/sessions/{session_id}/mesh", status_code=202)
    async def generate_meshes(session_id: str, request: Request) -> dict:
        body = await _json_body(request, required=False)
        backends = body.get("backends")

        def run():
            candidates = pipeline.advance_mesh(session_id, backends)
            state = pipeline.get(session_id)
            return {
                "candidates": [c.to_dict() for c in candidates],
                "failures": [
                    f.to_dict() for f in state.current_iteration.backend_failures
                ],
            }

        pipeline.get(session_id)
        return runner.submit("mesh", run, session_id=session_id).to_dict()

    @app.post("/sessions/{session_id}/select-mesh")
    async def select_mesh(session_id: str, request: Request) -> dict:
        body = await _json_body(request)
        session = pipeline.select_mesh(session_id, _require_int(body, "index"))
        return session.to_dict()

    @app.post("/sessions/{session_id}/postprocess", status_code=202)
    async def postprocess(session_id: str, request: Request) -> dict:
        body = await _json_body(request, required=False)
        plan = RepairPlan.from_dict(body.get("plan", {}))

        def run():
            stl_blob = pipeline.postprocess_and_export(session_id, plan)
            state = pipeline.get(session_id)
            return {
                "stl_blob": stl_blob,
                "report": state.current_iteration.final_report.to_dict(),
            }

        pipeline.get(session_id)
        return runner.submit("postprocess", run, session_id=session_id).to_dict()

    @app.get("/sessions/{session_id}/export.stl")
    def export_stl(session_id: str) -> Response:
        state = pipeline.get(session_id)
        if state.stage != Stage.EXPORTED:
            raise InvalidState(
                f"session is at {state.stage.value}; export finishes at Exported"
            )
        data = store.blobs.get(state.current_iteration.stl_blob)
        return Response(
            content=data,
            media_type="model/stl",
            headers={
                "Content-Disposition": f'attachment; filename="{session_id}.stl"'
            },
        )

    # --- artifacts and jobs ----------------------------------------------------

    @app.get("/blobs/{blob_hash}")
    def get_blob(blob_hash: str) -> Response:
        data = store.blobs.get(_require_hash(blob_hash))
        return Response(
            content=data,
            media_type=_sniff_content_type(data),
            # Content-addressed: the bytes behind a hash can never change.
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        return runner.get(job_id).to_dict()

    # --- datasets ----------------------------------------------------------------

    @app.post("/datasets", status_code=202)
    async def build_dataset(request: Request) -> dict:
        body = await _json_body(request)
        entries = [
            SourceEntry(_require(e, "sketch"), e.get("description", ""))
            for e in _require(body, "entries")
        ]
        source = SourceManifest(
            entries=entries,
            images_per_sketch=_int_field(body, "images_per_sketch", 4),
            seed=_int_field(body, "seed", config.seed),
            base_dir=Path(body.get("base_dir", config.data_dir)),
        )
        report = validate(source)
        if not report.ok:
            raise ValidationError(
                f"source manifest failed validation: {report.to_dict()['issues']}"
            )
        dataset_id = uuid.uuid4().hex
        out_dir = Path(config.data_dir) / "datasets" / dataset_id
        builder = DatasetBuilder(
            pipeline.gateway, embedder, workers=config.service.workers
        )

        def run():
            manifest = builder.build(source, out_dir)
            return {"dataset_id": dataset_id, "totals": manifest["totals"]}

        job = runner.submit("dataset_build", run, session_id=None)
        return {"dataset_id": dataset_id, "job": job.to_dict()}

    def _dataset_dir(dataset_id: str) -> Path:
        path = Path(config.data_dir) / "datasets" / dataset_id
        if not dataset_id or "/" in dataset_id or dataset_id.startswith(".") or not path.is_dir():
            raise NotFound(f"no dataset {dataset_id}")
        return path

    def _dataset_manifest(dataset_id: str) -> Path:
        path = _dataset_dir(dataset_id) / "manifest.json"
        if not path.exists():
            raise NotFound(f"no manifest for dataset {dataset_id}")
        return path

    @app.get("/datasets/{dataset_id}/manifest")
    def dataset_manifest(dataset_id: str) -> Response:
        return Response(
            content=_dataset_manifest(dataset_id).read_bytes(),
            media_type="application/json",
        )

    @app.get("/datasets/{dataset_id}/blobs/{blob_hash}")
    def dataset_blob(dataset_id: str, blob_hash: str) -> Response:
        # Datasets keep their artifacts in their own store so one dataset
        # can be archived or deleted as a unit; serve bytes from there.
        blobs = BlobStore(_dataset_dir(dataset_id) / "blobs")
        data = blobs.get(_require_hash(blob_hash))
        return Response(
            content=data,
            media_type=_sniff_content_type(data),
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    @app.post("/datasets/{dataset_id}/diversity")
    async def dataset_diversity(dataset_id: str, request: Request) -> dict:
        body = await _json_body(request, required=False)
        percentiles = _percentiles(body)
        manifest = json.loads(_dataset_manifest(dataset_id).read_text(encoding="utf-8"))
        blobs = BlobStore(_dataset_dir(dataset_id) / "blobs")
        scores = []
        for record in manifest["records"]:
            if record.get("status") != "complete":
                continue
            vecs = [embedder.embed_image(blobs.get(b)) for b in record["image_blobs"]]
            scores.append((str(record["index"]), pairwise_diversity(vecs).value))
        return percentile_exemplars(scores, percentiles).to_dict()

    # --- metrics ----------------------------------------------------------------

    @app.post("/metrics/alignment")
    async def metrics_alignment(request: Request) -> dict:
        body = await _json_body(request)
        corpus = []
        for record in _require(body, "records"):
            corpus.append(
                (
                    str(_require(record, "id")),
                    store.blobs.get(_require(record, "sketch_blob")),
                    _require(record, "description"),
                    [store.blobs.get(b) for b in _require(record, "image_blobs")],
                )
            )
        return alignment_report(corpus, embedder).to_dict()

    @app.post("/metrics/diversity")
    async def metrics_diversity(request: Request) -> dict:
        body = await _json_body(request)
        percentiles = _percentiles(body)
        scores = []
        for item in _require(body, "sets"):
            vecs = [
                embedder.embed_image(store.blobs.get(b))
                for b in _require(item, "image_blobs")
            ]
            scores.append(
                (str(_require(item, "id")), pairwise_diversity(vecs).value)
            )
        return percentile_exemplars(scores, percentiles).to_dict()

    return app


def route_table(app: FastAPI) -> list[str]:
    """Sorted "METHOD /path" rows for the declared API surface."""
    rows = []
    for route in app.routes:
        methods = getattr(route, "methods", None)
        path = getattr(route, "path", "")
        if not methods or path in ("/openapi.json",):
            continue
        rows.extend(
            f"{m} {path}" for m in sorted(methods) if m not in ("HEAD", "OPTIONS")
        )
    return sorted(rows)


def serve(config: AppConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(
        create_app(config), host=config.service.host, port=config.service.port
    )
