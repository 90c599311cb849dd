"""Commands that drive a design session, plus the three comparison routes.

Each command validates against the current stage, performs any provider
work, then appends exactly one event with an optimistic sequence check.
Provider failures therefore never leave a half-applied session: no event,
no state change.
"""

from __future__ import annotations

import copy
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    AllBackendsFailed,
    EmptyText,
    IndexOutOfRange,
    InvalidState,
    MeshParseError,
    ProviderError,
    Sketch2PrintError,
    TextFlaggedImage,
    UnknownBackend,
    ValidationError,
)
from .gateway import Gateway, require_raster
from .mesh import (
    ManufacturabilityReport,
    RepairPlan,
    analyze,
    apply_plan,
    parse_ply,
    render_silhouette,
    write_ply,
    write_stl,
)
from .metrics import Embedder, EmbeddingVector, clip_score, pairwise_diversity
from .session import (
    BackendFailure,
    CandidateImage,
    DesignSession,
    Iteration,
    MeshCandidate,
    PromptRevision,
    Stage,
    apply_event,
    fold_events,
    stage_index,
)
from .store import DataStore


class Route(str, Enum):
    FULL = "full"
    SKETCH_DIRECT = "sketch_direct"
    SKETCH_GUIDED = "sketch_guided"


@dataclass
class ComparisonRecord:
    """Everything one route run produced, for side-by-side evaluation."""

    route: str
    sketch_blob: str
    session_id: str | None = None
    prompt: str | None = None
    image_blobs: list[str] = field(default_factory=list)
    mean_similarity_to_sketch: float | None = None
    pairwise_image_similarity: float | None = None
    mesh_candidates: list[MeshCandidate] = field(default_factory=list)
    backend_failures: list[BackendFailure] = field(default_factory=list)
    selected_mesh: int | None = None
    final_report: ManufacturabilityReport | None = None
    stl_blob: str | None = None

    def to_dict(self) -> dict:
        return {
            "route": self.route,
            "sketch_blob": self.sketch_blob,
            "session_id": self.session_id,
            "prompt": self.prompt,
            "image_blobs": self.image_blobs,
            "mean_similarity_to_sketch": self.mean_similarity_to_sketch,
            "pairwise_image_similarity": self.pairwise_image_similarity,
            "mesh_candidates": [c.to_dict() for c in self.mesh_candidates],
            "backend_failures": [f.to_dict() for f in self.backend_failures],
            "selected_mesh": self.selected_mesh,
            "final_report": self.final_report.to_dict() if self.final_report else None,
            "stl_blob": self.stl_blob,
        }


def first_unflagged_index(images: list[CandidateImage]) -> int:
    for i, img in enumerate(images):
        if not img.contains_text:
            return i
    raise ValidationError("every candidate image is flagged as containing text")


def best_mesh_index(candidates: list[MeshCandidate]) -> int:
    """Highest similarity wins; missing scores lose; ties go to the first."""
    best = 0
    best_score = -1.0
    for i, cand in enumerate(candidates):
        score = cand.similarity_to_image if cand.similarity_to_image is not None else -1.0
        if score > best_score:
            best, best_score = i, score
    return best


class PipelineService:
    """Stateful facade over sessions: storage, providers, and metrics."""

    def __init__(
        self,
        store: DataStore,
        gateway: Gateway,
        embedder: Embedder | None = None,
    ):
        self.store = store
        self.gateway = gateway
        self.embedder = embedder
        self._cache: dict[str, DesignSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    # --- session access ----------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str) -> DesignSession:
        """Current state; callers must treat the result as read-only."""
        state = self._cache.get(session_id)
        if state is None:
            state = self.replay(session_id)
            self._cache[session_id] = state
        return state

    def replay(self, session_id: str) -> DesignSession:
        """Materialize from the log alone, bypassing the cache."""
        return fold_events(self.store.events.read(session_id))

    def session_ids(self) -> list[str]:
        return self.store.events.session_ids()

    def _commit(
        self, state: DesignSession, event_type: str, payload: dict, create: bool = False
    ) -> DesignSession:
        record = self.store.events.append(
            state.id,
            event_type,
            payload,
            expected_seq=state.version + 1,
            create=create,
        )
        # Apply to a copy and swap, so concurrent readers only ever see a
        # fully consistent snapshot.
        new_state = apply_event(
            copy.deepcopy(state) if event_type != "SessionCreated" else None, record
        )
        self._cache[new_state.id] = new_state
        return new_state

    @staticmethod
    def _require_stage(state: DesignSession, *allowed: Stage) -> None:
        if state.stage not in allowed:
            names = ", ".join(s.value for s in allowed)
            raise InvalidState(
                f"operation requires stage in [{names}], session is at {state.stage.value}"
            )

    # --- stage commands ----------------------------------------------------

    def create_session(self, sketch: bytes, user_note: str = "") -> DesignSession:
        require_raster(sketch, "sketch")
        session_id = uuid.uuid4().hex
        blob = self.store.blobs.put(sketch)
        seed = DesignSession(
            id=session_id, created_at="", sketch_blob=blob, user_note=user_note
        )
        with self._lock_for(session_id):
            return self._commit(
                seed,
                "SessionCreated",
                {"id": session_id, "sketch_blob": blob, "user_note": user_note},
                create=True,
            )

    def advance_describe(self, session_id: str) -> PromptRevision:
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.CREATED)
            sketch = self.store.blobs.get(state.sketch_blob)
            result = self.gateway.describe(sketch, state.user_note)
            revision = PromptRevision(index=1, text=result.generation_prompt)
            state = self._commit(
                state,
                "Described",
                {
                    "iteration": 1,
                    "revision": revision.to_dict(),
                    "description": result.description,
                },
            )
            return state.current_revision

    def edit_description(self, session_id: str, new_text: str) -> PromptRevision:
        if not new_text:
            raise EmptyText("edited text must be non-empty")
        with self._lock_for(session_id):
            state = self.get(session_id)
            if stage_index(state.stage) < stage_index(Stage.DESCRIBED):
                raise InvalidState("nothing to edit before a description exists")
            current = state.current_iteration
            revision = PromptRevision(
                index=self._next_revision_index(state),
                text=new_text,
                parent=current.prompt.index,
            )
            # An iteration that already has images keeps its history; the
            # edit then opens a fresh iteration instead of rewriting it.
            new_iteration = bool(current.images)
            iteration = current.index + 1 if new_iteration else current.index
            state = self._commit(
                state,
                "DescriptionEdited",
                {
                    "iteration": iteration,
                    "revision": revision.to_dict(),
                    "new_iteration": new_iteration,
                },
            )
            return state.current_revision

    @staticmethod
    def _next_revision_index(state: DesignSession) -> int:
        return max(it.prompt.index for it in state.iterations) + 1

    def advance_images(self, session_id: str, count: int = 4) -> list[CandidateImage]:
        if count < 1:
            raise ValidationError("image count must be positive")
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(
                state, Stage.DESCRIBED, Stage.IMAGES_GENERATED, Stage.IMAGE_SELECTED
            )
            prompt = state.current_revision.text
            generated = self.gateway.text_to_images(prompt, count)
            images = [
                CandidateImage(
                    blob=self.store.blobs.put(img.data),
                    revised_prompt=img.revised_prompt,
                    origin="text_to_image",
                )
                for img in generated
            ]
            before = len(state.current_iteration.images)
            state = self._commit(
                state,
                "ImagesGenerated",
                {
                    "iteration": state.current_iteration.index,
                    "images": [i.to_dict() for i in images],
                },
            )
            return state.current_iteration.images[before:]

    def append_feedback(
        self, session_id: str, feedback: str, count: int = 4
    ) -> Iteration:
        if not feedback:
            raise EmptyText("feedback must be non-empty")
        if count < 1:
            raise ValidationError("image count must be positive")
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.IMAGES_GENERATED, Stage.IMAGE_SELECTED)
            parent = state.current_revision
            revision = PromptRevision(
                index=self._next_revision_index(state),
                text=parent.text + " " + feedback,
                parent=parent.index,
                appended_feedback=feedback,
            )
            generated = self.gateway.text_to_images(revision.text, count)
            images = [
                CandidateImage(
                    blob=self.store.blobs.put(img.data),
                    revised_prompt=img.revised_prompt,
                    origin="text_to_image",
                )
                for img in generated
            ]
            state = self._commit(
                state,
                "FeedbackAppended",
                {
                    "iteration": state.current_iteration.index + 1,
                    "revision": revision.to_dict(),
                    "images": [i.to_dict() for i in images],
                },
            )
            return state.current_iteration

    def select_image(
        self,
        session_id: str,
        index: int,
        contains_text_flags: list[bool] | None = None,
    ) -> DesignSession:
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.IMAGES_GENERATED, Stage.IMAGE_SELECTED)
            images = state.current_iteration.images
            if contains_text_flags is not None and len(contains_text_flags) != len(
                images
            ):
                raise ValidationError(
                    f"got {len(contains_text_flags)} flags for {len(images)} images"
                )
            if not 0 <= index < len(images):
                raise IndexOutOfRange(
                    f"image index {index} out of range [0, {len(images)})"
                )
            flagged = (
                contains_text_flags[index]
                if contains_text_flags is not None
                else images[index].contains_text
            )
            if flagged:
                raise TextFlaggedImage(
                    f"image {index} is flagged as containing text"
                )
            return self._commit(
                state,
                "ImageSelected",
                {
                    "iteration": state.current_iteration.index,
                    "index": index,
                    "contains_text_flags": contains_text_flags,
                },
            )

    def advance_mesh(
        self, session_id: str, backends: list[str] | None = None
    ) -> list[MeshCandidate]:
        backends = backends or self.gateway.mesh_backend_names
        if not backends:
            raise ValidationError("at least one mesh backend is required")
        unknown = [b for b in backends if b not in self.gateway.mesh_backend_names]
        if unknown:
            raise UnknownBackend(f"unknown mesh backends: {unknown}")
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.IMAGE_SELECTED)
            it = state.current_iteration
            image = self.store.blobs.get(it.images[it.selected_image].blob)
            reference = (
                self.embedder.embed_image(image) if self.embedder is not None else None
            )
            candidates, failures = self._generate_meshes(image, backends, reference)
            if not candidates:
                raise AllBackendsFailed(
                    "; ".join(f"{f.backend}: {f.detail}" for f in failures)
                )
            state = self._commit(
                state,
                "MeshGenerated",
                {
                    "iteration": it.index,
                    "candidates": [c.to_dict() for c in candidates],
                    "failures": [f.to_dict() for f in failures],
                },
            )
            return state.current_iteration.mesh_candidates

    def _generate_meshes(
        self,
        image: bytes,
        backends: list[str],
        reference: EmbeddingVector | None,
    ) -> tuple[list[MeshCandidate], list[BackendFailure]]:
        """One candidate per backend that succeeds; failures recorded."""
        candidates, failures = [], []
        for backend in backends:
            try:
                ply = self.gateway.image_to_mesh(image, backend)
                mesh = parse_ply(ply)
            except (ProviderError, MeshParseError) as err:
                failures.append(BackendFailure(backend, err.kind, err.detail))
                continue
            similarity = None
            if reference is not None:
                silhouette = self.embedder.embed_image(render_silhouette(mesh))
                similarity = clip_score(silhouette, reference).value
            candidates.append(
                MeshCandidate(
                    backend=backend,
                    blob=self.store.blobs.put(ply),
                    report=analyze(mesh),
                    similarity_to_image=similarity,
                )
            )
        return candidates, failures

    def select_mesh(self, session_id: str, index: int) -> DesignSession:
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.MESH_GENERATED, Stage.MESH_SELECTED)
            count = len(state.current_iteration.mesh_candidates)
            if not 0 <= index < count:
                raise IndexOutOfRange(f"mesh index {index} out of range [0, {count})")
            return self._commit(
                state,
                "MeshSelected",
                {"iteration": state.current_iteration.index, "index": index},
            )

    def postprocess(
        self, session_id: str, plan: RepairPlan | None = None
    ) -> ManufacturabilityReport:
        plan = plan or RepairPlan()
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.MESH_SELECTED)
            it = state.current_iteration
            candidate = it.mesh_candidates[it.selected_mesh]
            mesh = parse_ply(self.store.blobs.get(candidate.blob))
            repaired, report_after = apply_plan(mesh, plan)
            repaired_blob = self.store.blobs.put(write_ply(repaired, binary=True))
            state = self._commit(
                state,
                "PostProcessed",
                {
                    "iteration": it.index,
                    "plan": plan.to_dict(),
                    "report_before": candidate.report.to_dict(),
                    "report_after": report_after.to_dict(),
                    "repaired_blob": repaired_blob,
                },
            )
            return state.current_iteration.final_report

    def export_stl(self, session_id: str) -> str:
        """Write the repaired mesh as binary STL; returns the blob hash."""
        with self._lock_for(session_id):
            state = self.get(session_id)
            self._require_stage(state, Stage.POST_PROCESSED)
            it = state.current_iteration
            mesh = parse_ply(self.store.blobs.get(it.repaired_blob))
            stl_blob = self.store.blobs.put(write_stl(mesh))
            state = self._commit(
                state,
                "Exported",
                {
                    "iteration": it.index,
                    "stl_blob": stl_blob,
                    "report": it.final_report.to_dict(),
                },
            )
            return state.current_iteration.stl_blob

    def postprocess_and_export(
        self, session_id: str, plan: RepairPlan | None = None
    ) -> str:
        """Repair then export in one call; printable=false still exports."""
        self.postprocess(session_id, plan)
        return self.export_stl(session_id)

    # --- comparison routes ---------------------------------------------------

    def run_route(
        self,
        sketch: bytes,
        route: Route | str,
        count: int = 4,
        backends: list[str] | None = None,
        plan: RepairPlan | None = None,
    ) -> ComparisonRecord:
        route = Route(route)
        require_raster(sketch, "sketch")
        if count < 1:
            raise ValidationError("image count must be positive")
        backends = backends or self.gateway.mesh_backend_names
        if route is Route.FULL:
            return self._run_full(sketch, count, backends, plan)
        if route is Route.SKETCH_DIRECT:
            return self._run_sketch_direct(sketch, backends)
        return self._run_sketch_guided(sketch, count, backends)

    def _image_stats(
        self, sketch: bytes, image_bytes: list[bytes]
    ) -> tuple[float | None, float | None]:
        if self.embedder is None or not image_bytes:
            return None, None
        sketch_vec = self.embedder.embed_image(sketch)
        vecs = [self.embedder.embed_image(b) for b in image_bytes]
        mean_sim = sum(clip_score(sketch_vec, v).value for v in vecs) / len(vecs)
        pairwise = (
            pairwise_diversity(vecs).value if len(vecs) >= 2 else None
        )
        return mean_sim, pairwise

    def _run_full(
        self,
        sketch: bytes,
        count: int,
        backends: list[str],
        plan: RepairPlan | None,
    ) -> ComparisonRecord:
        session = self.create_session(sketch, "")
        sid = session.id
        self.advance_describe(sid)
        images = self.advance_images(sid, count)
        state = self.get(sid)
        self.select_image(sid, first_unflagged_index(state.current_iteration.images))
        candidates = self.advance_mesh(sid, backends)
        self.select_mesh(sid, best_mesh_index(candidates))
        self.postprocess_and_export(sid, plan)
        state = self.get(sid)
        it = state.current_iteration
        image_bytes = [self.store.blobs.get(img.blob) for img in it.images]
        mean_sim, pairwise = self._image_stats(sketch, image_bytes)
        return ComparisonRecord(
            route=Route.FULL.value,
            sketch_blob=state.sketch_blob,
            session_id=sid,
            prompt=it.prompt.text,
            image_blobs=[img.blob for img in it.images],
            mean_similarity_to_sketch=mean_sim,
            pairwise_image_similarity=pairwise,
            mesh_candidates=list(it.mesh_candidates),
            backend_failures=list(it.backend_failures),
            selected_mesh=it.selected_mesh,
            final_report=it.final_report,
            stl_blob=it.stl_blob,
        )

    def _run_sketch_direct(
        self, sketch: bytes, backends: list[str]
    ) -> ComparisonRecord:
        # The raw sketch goes straight to the first 3D backend; no
        # description, no concept images.
        reference = (
            self.embedder.embed_image(sketch) if self.embedder is not None else None
        )
        candidates, failures = self._generate_meshes(sketch, backends[:1], reference)
        return ComparisonRecord(
            route=Route.SKETCH_DIRECT.value,
            sketch_blob=self.store.blobs.put(sketch),
            mesh_candidates=candidates,
            backend_failures=failures,
            selected_mesh=0 if candidates else None,
            final_report=candidates[0].report if candidates else None,
        )

    def _run_sketch_guided(
        self, sketch: bytes, count: int, backends: list[str]
    ) -> ComparisonRecord:
        generated = self.gateway.sketch_guided_images(sketch, "", count)
        sketch_blob = self.store.blobs.put(sketch)
        image_blobs = [self.store.blobs.put(img.data) for img in generated]
        reference = (
            self.embedder.embed_image(sketch) if self.embedder is not None else None
        )
        candidates, failures = [], []
        for img in generated:
            cands, fails = self._generate_meshes(img.data, backends[:1], reference)
            candidates.extend(cands)
            failures.extend(fails)
        mean_sim, pairwise = self._image_stats(
            sketch, [img.data for img in generated]
        )
        return ComparisonRecord(
            route=Route.SKETCH_GUIDED.value,
            sketch_blob=sketch_blob,
            image_blobs=image_blobs,
            mean_similarity_to_sketch=mean_sim,
            pairwise_image_similarity=pairwise,
            mesh_candidates=candidates,
            backend_failures=failures,
            selected_mesh=0 if candidates else None,
            final_report=candidates[0].report if candidates else None,
        )

    # --- maintenance -----------------------------------------------------------

    def referenced_blobs(self) -> set[str]:
        refs: set[str] = set()
        for sid in self.session_ids():
            try:
                refs |= self.get(sid).referenced_blobs()
            except Sketch2PrintError:
                continue
        return refs
