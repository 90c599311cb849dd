"""Command-line front door: every pipeline stage, the comparison routes,
metrics, datasets, mesh tools, the server, and blob GC.

Exit codes: 0 success, 2 validation or usage, 3 provider failure,
4 invalid session state.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .dataset import DatasetBuilder, load_source_manifest, validate
from .errors import (
    AllBackendsFailed,
    InvalidState,
    ProviderError,
    SequenceConflict,
    Sketch2PrintError,
    ValidationError,
)
from .mesh import (
    RepairPlan,
    analyze,
    apply_plan,
    parse_ply,
    read_stl,
    weld_vertices,
    write_ply,
    write_stl,
)
from .metrics import alignment_report, pairwise_diversity, percentile_exemplars
from .pipeline import PipelineService, Route
from .session import Stage

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_STATE = 4


def _exit_code(exc: Sketch2PrintError) -> int:
    if isinstance(exc, (ProviderError, AllBackendsFailed)):
        return EXIT_PROVIDER
    if isinstance(exc, (InvalidState, SequenceConflict)):
        return EXIT_STATE
    return EXIT_VALIDATION


def _emit(args, payload, human: str | None = None) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif human:
        print(human)


def _config_from_args(args) -> AppConfig:
    config = load_config(args.config)
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.data_dir:
        overrides["data_dir"] = args.data_dir
    return dataclasses.replace(config, **overrides) if overrides else config


def _pipeline(args) -> PipelineService:
    from .config import build_pipeline

    return build_pipeline(_config_from_args(args))


def _load_mesh(path: str):
    data = Path(path).read_bytes()
    if path.lower().endswith(".stl"):
        # STL stores triangle soup; exact weld recovers shared topology.
        return weld_vertices(read_stl(data), 0.0)
    return parse_ply(data)


def _plan_from_args(args) -> RepairPlan:
    if getattr(args, "plan", None):
        return RepairPlan.from_dict(json.loads(Path(args.plan).read_text()))
    kwargs = {}
    for flag, field in (
        ("weld_epsilon", "weld_epsilon"),
        ("min_component_fraction", "component_min_fraction"),
        ("smooth_lambda", "smoothing_lambda"),
        ("smooth_mu", "smoothing_mu"),
        ("smooth_iterations", "smoothing_iterations"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[field] = value
    if getattr(args, "no_fill_holes", False):
        kwargs["fill_holes"] = False
    return RepairPlan(**kwargs)


# --- session commands ----------------------------------------------------------


def cmd_session_new(args) -> int:
    svc = _pipeline(args)
    session = svc.create_session(Path(args.sketch).read_bytes(), args.note)
    _emit(args, session.to_dict(), f"created session {session.id}")
    if not args.json:
        print(session.id)
    return EXIT_OK


def cmd_session_show(args) -> int:
    svc = _pipeline(args)
    state = svc.get(args.id)
    _emit(
        args,
        state.to_dict(),
        f"session {state.id} stage={state.stage.value} version={state.version} "
        f"iterations={len(state.iterations)}",
    )
    return EXIT_OK


def cmd_session_describe(args) -> int:
    svc = _pipeline(args)
    revision = svc.advance_describe(args.id)
    state = svc.get(args.id)
    _emit(
        args,
        {"revision": revision.to_dict(), "description": state.description},
        f"description: {state.description}\nprompt: {revision.text}",
    )
    return EXIT_OK


def cmd_session_edit(args) -> int:
    svc = _pipeline(args)
    revision = svc.edit_description(args.id, args.text)
    _emit(args, {"revision": revision.to_dict()}, f"revision {revision.index}: {revision.text}")
    return EXIT_OK


def _write_images(svc, session_id: str, images, out_dir: str) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = svc.get(session_id)
    iteration = state.current_iteration.index
    paths = []
    for i, image in enumerate(images):
        path = out / f"{session_id[:8]}-it{iteration}-{i}.png"
        path.write_bytes(svc.store.blobs.get(image.blob))
        paths.append(str(path))
    return paths


def cmd_session_images(args) -> int:
    svc = _pipeline(args)
    images = svc.advance_images(args.id, args.count)
    paths = _write_images(svc, args.id, images, args.out)
    _emit(
        args,
        {"images": [img.to_dict() for img in images], "files": paths},
        "\n".join(paths),
    )
    return EXIT_OK


def cmd_session_feedback(args) -> int:
    svc = _pipeline(args)
    iteration = svc.append_feedback(args.id, args.text, args.count)
    paths = _write_images(svc, args.id, iteration.images, args.out)
    _emit(
        args,
        {"iteration": iteration.to_dict(), "files": paths},
        f"iteration {iteration.index}: {iteration.prompt.text}\n" + "\n".join(paths),
    )
    return EXIT_OK


def cmd_session_select_image(args) -> int:
    svc = _pipeline(args)
    flags = None
    if args.flags:
        flags = [token.strip() in ("1", "true", "yes") for token in args.flags.split(",")]
    state = svc.select_image(args.id, args.index, flags)
    _emit(args, state.to_dict(), f"selected image {args.index}")
    return EXIT_OK


def cmd_session_mesh(args) -> int:
    svc = _pipeline(args)
    backends = args.backends.split(",") if args.backends else None
    candidates = svc.advance_mesh(args.id, backends)
    human = "\n".join(
        f"[{i}] {c.backend} printable={c.report.printable} "
        f"similarity={c.similarity_to_image if c.similarity_to_image is None else round(c.similarity_to_image, 2)}"
        for i, c in enumerate(candidates)
    )
    _emit(args, {"candidates": [c.to_dict() for c in candidates]}, human)
    return EXIT_OK


def cmd_session_select_mesh(args) -> int:
    svc = _pipeline(args)
    state = svc.select_mesh(args.id, args.index)
    _emit(args, state.to_dict(), f"selected mesh {args.index}")
    return EXIT_OK


def cmd_session_postprocess(args) -> int:
    svc = _pipeline(args)
    report = svc.postprocess(args.id, _plan_from_args(args))
    _emit(args, {"report": report.to_dict()}, f"printable={report.printable}")
    return EXIT_OK


def cmd_session_export(args) -> int:
    svc = _pipeline(args)
    state = svc.get(args.id)
    if state.stage == Stage.POST_PROCESSED:
        stl_blob = svc.export_stl(args.id)
    elif state.stage == Stage.EXPORTED:
        stl_blob = state.current_iteration.stl_blob
    else:
        raise InvalidState(
            f"session is at {state.stage.value}; run postprocess first"
        )
    out = args.out or f"{args.id[:8]}.stl"
    Path(out).write_bytes(svc.store.blobs.get(stl_blob))
    _emit(args, {"stl_blob": stl_blob, "file": out}, out)
    return EXIT_OK


# --- routes ----------------------------------------------------------------------


def cmd_route_run(args) -> int:
    svc = _pipeline(args)
    route = Route(args.route.replace("-", "_"))
    backends = args.backends.split(",") if args.backends else None
    record = svc.run_route(
        Path(args.sketch).read_bytes(), route, count=args.count, backends=backends
    )
    human = (
        f"route={record.route} images={len(record.image_blobs)} "
        f"meshes={len(record.mesh_candidates)} "
        f"printable={record.final_report.printable if record.final_report else None} "
        f"diversity={record.pairwise_image_similarity}"
    )
    _emit(args, record.to_dict(), human)
    return EXIT_OK


# --- metrics ---------------------------------------------------------------------


def cmd_metrics_alignment(args) -> int:
    from .config import build_embedder

    embedder = build_embedder(_config_from_args(args))
    spec = json.loads(Path(args.records).read_text())
    records = spec["records"] if isinstance(spec, dict) else spec
    base = Path(args.records).parent
    corpus = [
        (
            str(r.get("id", i)),
            (base / r["sketch"]).read_bytes(),
            r["description"],
            [(base / p).read_bytes() for p in r["images"]],
        )
        for i, r in enumerate(records)
    ]
    report = alignment_report(corpus, embedder)
    payload = report.to_dict()
    means = payload["corpus_means"]
    _emit(
        args,
        payload,
        f"sketch-text {means['sketch_text']:.1f}  image-text {means['image_text']:.1f}  "
        f"sketch-image {means['sketch_image']:.1f} over {len(corpus)} records",
    )
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return EXIT_OK


def cmd_metrics_diversity(args) -> int:
    from .config import build_embedder

    embedder = build_embedder(_config_from_args(args))
    spec = json.loads(Path(args.sets).read_text())
    sets = spec["sets"] if isinstance(spec, dict) else spec
    base = Path(args.sets).parent
    percentiles = [float(p) for p in args.percentiles.split(",")]
    scores = []
    for i, item in enumerate(sets):
        vecs = [embedder.embed_image((base / p).read_bytes()) for p in item["images"]]
        scores.append((str(item.get("id", i)), pairwise_diversity(vecs).value))
    dist = percentile_exemplars(scores, percentiles)
    human = "\n".join(
        f"p{e.percentile:g}: set {e.set_id} score {e.score:.2f}" for e in dist.exemplars
    )
    _emit(args, dist.to_dict(), human)
    return EXIT_OK


# --- datasets ----------------------------------------------------------------------


def cmd_dataset_validate(args) -> int:
    report = validate(load_source_manifest(args.manifest))
    _emit(
        args,
        report.to_dict(),
        f"{report.entry_count} entries, {len(report.issues)} issues"
        + "".join(f"\n  [{i.index}] {i.kind}: {i.detail}" for i in report.issues),
    )
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _dataset_builder(args) -> DatasetBuilder:
    from .config import build_embedder, build_gateway

    config = _config_from_args(args)
    return DatasetBuilder(
        build_gateway(config), build_embedder(config), workers=args.workers
    )


def cmd_dataset_build(args) -> int:
    source = load_source_manifest(args.manifest)
    manifest = _dataset_builder(args).build(source, args.out, limit=args.limit)
    _emit(args, manifest, f"totals: {manifest.get('totals', manifest)}")
    return EXIT_OK


def cmd_dataset_resume(args) -> int:
    source = load_source_manifest(args.manifest)
    manifest = _dataset_builder(args).resume(source, args.out)
    _emit(args, manifest, f"totals: {manifest.get('totals', manifest)}")
    return EXIT_OK


# --- mesh tools -------------------------------------------------------------------


def cmd_mesh_analyze(args) -> int:
    report = analyze(_load_mesh(args.mesh))
    _emit(
        args,
        report.to_dict(),
        f"printable={report.printable} boundary={report.boundary_edge_count} "
        f"nonmanifold={report.nonmanifold_edge_count} components={report.component_count} "
        f"volume={report.signed_volume:.6g}",
    )
    return EXIT_OK


def _write_mesh(mesh, path: str) -> None:
    data = write_stl(mesh) if path.lower().endswith(".stl") else write_ply(mesh, binary=True)
    Path(path).write_bytes(data)


def cmd_mesh_repair(args) -> int:
    mesh = _load_mesh(args.mesh)
    repaired, report = apply_plan(mesh, _plan_from_args(args))
    _write_mesh(repaired, args.out)
    _emit(
        args,
        {"report": report.to_dict(), "file": args.out},
        f"{args.out}: printable={report.printable}",
    )
    return EXIT_OK


def cmd_mesh_convert(args) -> int:
    mesh = _load_mesh(args.mesh)
    if not args.out.lower().endswith(".stl"):
        raise ValidationError("convert writes STL; use an .stl output path")
    Path(args.out).write_bytes(write_stl(mesh))
    _emit(args, {"file": args.out, "triangles": len(mesh.triangles)}, args.out)
    return EXIT_OK


# --- server and store ----------------------------------------------------------


def cmd_serve(args) -> int:
    from .service import serve

    config = _config_from_args(args)
    if args.host:
        config.service.host = args.host
    if args.port:
        config.service.port = args.port
    serve(config)
    return EXIT_OK


def cmd_store_gc(args) -> int:
    svc = _pipeline(args)
    referenced = svc.referenced_blobs()
    if args.dry_run:
        doomed = [h for h in svc.store.blobs.all_hashes() if h not in referenced]
        _emit(
            args,
            {"would_delete": doomed},
            f"would delete {len(doomed)} blobs ({len(referenced)} referenced)",
        )
        return EXIT_OK
    deleted = svc.store.collect_garbage(referenced)
    _emit(args, {"deleted": deleted}, f"deleted {len(deleted)} unreferenced blobs")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s2p",
        description="Sketch to print-ready prototype pipeline.",
    )
    parser.add_argument("--data-dir", help="root directory for blobs and sessions")
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--mode", choices=["mock", "live"], help="provider mode")
    parser.add_argument("--seed", type=int, help="deterministic provider seed")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    # session
    session = sub.add_parser("session", help="drive one design session")
    ssub = session.add_subparsers(dest="subcommand", required=True)

    p = ssub.add_parser("new", help="create a session from a sketch image")
    p.add_argument("sketch")
    p.add_argument("--note", default="", help="free-text note about the sketch")
    p.set_defaults(func=cmd_session_new)

    p = ssub.add_parser("show", help="print session state")
    p.add_argument("id")
    p.set_defaults(func=cmd_session_show)

    p = ssub.add_parser("describe", help="generate description and prompt")
    p.add_argument("id")
    p.set_defaults(func=cmd_session_describe)

    p = ssub.add_parser("edit", help="replace the generation prompt")
    p.add_argument("id")
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_session_edit)

    p = ssub.add_parser("images", help="generate candidate images")
    p.add_argument("id")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--out", default=".", help="directory for the PNG files")
    p.set_defaults(func=cmd_session_images)

    p = ssub.add_parser("feedback", help="append feedback and regenerate")
    p.add_argument("id")
    p.add_argument("--text", required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--out", default=".", help="directory for the PNG files")
    p.set_defaults(func=cmd_session_feedback)

    p = ssub.add_parser("select-image", help="choose a candidate image")
    p.add_argument("id")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--flags", help="comma list of contains-text flags, e.g. 0,0,1,0")
    p.set_defaults(func=cmd_session_select_image)

    p = ssub.add_parser("mesh", help="generate mesh candidates")
    p.add_argument("id")
    p.add_argument("--backends", help="comma list of backend names")
    p.set_defaults(func=cmd_session_mesh)

    p = ssub.add_parser("select-mesh", help="choose a mesh candidate")
    p.add_argument("id")
    p.add_argument("--index", type=int, required=True)
    p.set_defaults(func=cmd_session_select_mesh)

    p = ssub.add_parser("postprocess", help="repair the selected mesh")
    p.add_argument("id")
    p.add_argument("--plan", help="JSON file with repair plan overrides")
    p.set_defaults(func=cmd_session_postprocess)

    p = ssub.add_parser("export", help="write the final binary STL")
    p.add_argument("id")
    p.add_argument("--out", help="output STL path")
    p.set_defaults(func=cmd_session_export)

    # route
    route = sub.add_parser("route", help="comparison routes")
    rsub = route.add_subparsers(dest="subcommand", required=True)
    p = rsub.add_parser("run", help="run one route end to end")
    p.add_argument("sketch")
    p.add_argument(
        "--route",
        required=True,
        choices=["full", "sketch-direct", "sketch-guided"],
    )
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--backends", help="comma list of backend names")
    p.set_defaults(func=cmd_route_run)

    # metrics
    metrics = sub.add_parser("metrics", help="alignment and diversity reports")
    msub = metrics.add_subparsers(dest="subcommand", required=True)
    p = msub.add_parser("alignment", help="three-way alignment means")
    p.add_argument("records", help="JSON file of records with sketch/description/images")
    p.add_argument("--csv", help="also write per-record rows as CSV")
    p.set_defaults(func=cmd_metrics_alignment)
    p = msub.add_parser("diversity", help="pairwise diversity percentiles")
    p.add_argument("sets", help="JSON file of image sets")
    p.add_argument("--percentiles", default="5,50,95")
    p.set_defaults(func=cmd_metrics_diversity)

    # dataset
    dataset = sub.add_parser("dataset", help="batch corpus building")
    dsub = dataset.add_subparsers(dest="subcommand", required=True)
    p = dsub.add_parser("validate", help="check a source manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_dataset_validate)
    p = dsub.add_parser("build", help="build a dataset from scratch")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--limit", type=int, help="stop after N records (for testing)")
    p.set_defaults(func=cmd_dataset_build)
    p = dsub.add_parser("resume", help="finish an interrupted build")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_dataset_resume)

    # mesh
    mesh = sub.add_parser("mesh", help="standalone mesh tools")
    xsub = mesh.add_subparsers(dest="subcommand", required=True)
    p = xsub.add_parser("analyze", help="manufacturability report")
    p.add_argument("mesh")
    p.set_defaults(func=cmd_mesh_analyze)
    p = xsub.add_parser("repair", help="apply a repair plan")
    p.add_argument("mesh")
    p.add_argument("--out", required=True)
    p.add_argument("--plan", help="JSON file with repair plan overrides")
    p.add_argument("--weld-epsilon", type=float)
    p.add_argument("--min-component-fraction", type=float)
    p.add_argument("--no-fill-holes", action="store_true")
    p.add_argument("--smooth-lambda", type=float)
    p.add_argument("--smooth-mu", type=float)
    p.add_argument("--smooth-iterations", type=int)
    p.set_defaults(func=cmd_mesh_repair)
    p = xsub.add_parser("convert", help="PLY or STL in, binary STL out")
    p.add_argument("mesh")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh_convert)

    # serve
    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    # store
    store = sub.add_parser("store", help="storage maintenance")
    stsub = store.add_subparsers(dest="subcommand", required=True)
    p = stsub.add_parser("gc", help="delete unreferenced blobs")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_store_gc)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Sketch2PrintError as exc:
        print(f"error[{exc.kind}]: {exc.detail}", file=sys.stderr)
        return _exit_code(exc)
    except FileNotFoundError as exc:
        print(f"error[MissingFile]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"error[BadJson]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
