"""Design-session state and the event fold that materializes it.

A session is never mutated directly: commands append events (see pipeline)
and this module folds an event sequence into a DesignSession. Folding the
same log always yields the same state, which is what makes the on-disk log
the source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import CorruptLog
from .mesh import ManufacturabilityReport


class Stage(str, Enum):
    CREATED = "Created"
    DESCRIBED = "Described"
    IMAGES_GENERATED = "ImagesGenerated"
    IMAGE_SELECTED = "ImageSelected"
    MESH_GENERATED = "MeshGenerated"
    MESH_SELECTED = "MeshSelected"
    POST_PROCESSED = "PostProcessed"
    EXPORTED = "Exported"


STAGE_ORDER = tuple(Stage)


def stage_index(stage: Stage) -> int:
    return STAGE_ORDER.index(stage)


@dataclass
class PromptRevision:
    index: int
    text: str
    parent: int | None = None
    appended_feedback: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "text": self.text,
            "parent": self.parent,
            "appended_feedback": self.appended_feedback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PromptRevision":
        return cls(d["index"], d["text"], d.get("parent"), d.get("appended_feedback"))


@dataclass
class CandidateImage:
    blob: str
    revised_prompt: str
    contains_text: bool = False
    origin: str = "text_to_image"

    def to_dict(self) -> dict:
        return {
            "blob": self.blob,
            "revised_prompt": self.revised_prompt,
            "contains_text": self.contains_text,
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateImage":
        return cls(
            d["blob"],
            d["revised_prompt"],
            d.get("contains_text", False),
            d.get("origin", "text_to_image"),
        )


@dataclass
class MeshCandidate:
    backend: str
    blob: str
    report: ManufacturabilityReport
    similarity_to_image: float | None = None

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "blob": self.blob,
            "report": self.report.to_dict(),
            "similarity_to_image": self.similarity_to_image,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeshCandidate":
        return cls(
            d["backend"],
            d["blob"],
            ManufacturabilityReport.from_dict(d["report"]),
            d.get("similarity_to_image"),
        )


@dataclass
class BackendFailure:
    backend: str
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {"backend": self.backend, "kind": self.kind, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "BackendFailure":
        return cls(d["backend"], d["kind"], d["detail"])


@dataclass
class Iteration:
    index: int
    prompt: PromptRevision
    images: list[CandidateImage] = field(default_factory=list)
    selected_image: int | None = None
    mesh_candidates: list[MeshCandidate] = field(default_factory=list)
    backend_failures: list[BackendFailure] = field(default_factory=list)
    selected_mesh: int | None = None
    repaired_blob: str | None = None
    final_report: ManufacturabilityReport | None = None
    stl_blob: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prompt": self.prompt.to_dict(),
            "images": [i.to_dict() for i in self.images],
            "selected_image": self.selected_image,
            "mesh_candidates": [c.to_dict() for c in self.mesh_candidates],
            "backend_failures": [f.to_dict() for f in self.backend_failures],
            "selected_mesh": self.selected_mesh,
            "repaired_blob": self.repaired_blob,
            "final_report": self.final_report.to_dict() if self.final_report else None,
            "stl_blob": self.stl_blob,
        }


@dataclass
class DesignSession:
    id: str
    created_at: str
    sketch_blob: str
    user_note: str
    stage: Stage = Stage.CREATED
    version: int = 0
    description: str | None = None
    iterations: list[Iteration] = field(default_factory=list)

    @property
    def current_iteration(self) -> Iteration | None:
        return self.iterations[-1] if self.iterations else None

    @property
    def current_revision(self) -> PromptRevision | None:
        cur = self.current_iteration
        return cur.prompt if cur else None

    def referenced_blobs(self) -> set[str]:
        refs = {self.sketch_blob}
        for it in self.iterations:
            refs.update(img.blob for img in it.images)
            refs.update(c.blob for c in it.mesh_candidates)
            refs.update(b for b in (it.repaired_blob, it.stl_blob) if b)
        return refs

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "sketch_blob": self.sketch_blob,
            "user_note": self.user_note,
            "stage": self.stage.value,
            "version": self.version,
            "description": self.description,
            "iterations": [it.to_dict() for it in self.iterations],
        }


# Closed set of event types; anything else in a log is corruption.
EVENT_TYPES = frozenset(
    {
        "SessionCreated",
        "Described",
        "DescriptionEdited",
        "ImagesGenerated",
        "FeedbackAppended",
        "ImageSelected",
        "MeshGenerated",
        "MeshSelected",
        "PostProcessed",
        "Exported",
    }
)


def apply_event(state: DesignSession | None, record: dict) -> DesignSession:
    """Fold one event record into the session state.

    Commands validate before appending, so the fold trusts payloads;
    structural impossibilities still raise CorruptLog.
    """
    etype = record["type"]
    payload = record["payload"]
    if etype not in EVENT_TYPES:
        raise CorruptLog(f"unknown event type {etype!r}")

    if etype == "SessionCreated":
        if state is not None:
            raise CorruptLog("SessionCreated after the first event")
        state = DesignSession(
            id=payload["id"],
            created_at=record["ts"],
            sketch_blob=payload["sketch_blob"],
            user_note=payload["user_note"],
        )
        state.version = record["seq"]
        return state
    if state is None:
        raise CorruptLog(f"first event must be SessionCreated, got {etype}")

    if etype == "Described":
        state.iterations.append(
            Iteration(index=1, prompt=PromptRevision.from_dict(payload["revision"]))
        )
        state.description = payload["description"]
        state.stage = Stage.DESCRIBED
    elif etype == "DescriptionEdited":
        revision = PromptRevision.from_dict(payload["revision"])
        if payload["new_iteration"]:
            state.iterations.append(
                Iteration(index=payload["iteration"], prompt=revision)
            )
        else:
            state.iterations[-1] = Iteration(
                index=payload["iteration"], prompt=revision
            )
        state.stage = Stage.DESCRIBED
    elif etype == "ImagesGenerated":
        images = [CandidateImage.from_dict(d) for d in payload["images"]]
        state.iterations[payload["iteration"] - 1].images.extend(images)
        state.stage = Stage.IMAGES_GENERATED
    elif etype == "FeedbackAppended":
        state.iterations.append(
            Iteration(
                index=payload["iteration"],
                prompt=PromptRevision.from_dict(payload["revision"]),
                images=[CandidateImage.from_dict(d) for d in payload["images"]],
            )
        )
        state.stage = Stage.IMAGES_GENERATED
    elif etype == "ImageSelected":
        it = state.iterations[payload["iteration"] - 1]
        flags = payload.get("contains_text_flags")
        if flags is not None:
            for img, flag in zip(it.images, flags):
                img.contains_text = bool(flag)
        it.selected_image = payload["index"]
        state.stage = Stage.IMAGE_SELECTED
    elif etype == "MeshGenerated":
        it = state.iterations[payload["iteration"] - 1]
        it.mesh_candidates = [
            MeshCandidate.from_dict(d) for d in payload["candidates"]
        ]
        it.backend_failures = [
            BackendFailure.from_dict(d) for d in payload["failures"]
        ]
        it.selected_mesh = None
        state.stage = Stage.MESH_GENERATED
    elif etype == "MeshSelected":
        state.iterations[payload["iteration"] - 1].selected_mesh = payload["index"]
        state.stage = Stage.MESH_SELECTED
    elif etype == "PostProcessed":
        it = state.iterations[payload["iteration"] - 1]
        it.repaired_blob = payload["repaired_blob"]
        it.final_report = ManufacturabilityReport.from_dict(payload["report_after"])
        state.stage = Stage.POST_PROCESSED
    elif etype == "Exported":
        state.iterations[payload["iteration"] - 1].stl_blob = payload["stl_blob"]
        state.stage = Stage.EXPORTED

    state.version = record["seq"]
    return state


def fold_events(records: list[dict]) -> DesignSession:
    """Materialize a session from its complete event sequence."""
    if not records:
        raise CorruptLog("empty event log")
    state: DesignSession | None = None
    for record in records:
        state = apply_event(state, record)
    return state
