"""Background jobs with polling semantics.

States move queued -> running -> succeeded | failed and never leave a
terminal state. At most one job may be in flight per session; submitting
another is a conflict the caller must surface as 409.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import InvalidState, NotFound, Sketch2PrintError

TERMINAL = ("succeeded", "failed")


@dataclass
class Job:
    id: str
    kind: str
    session_id: str | None = None
    state: str = "queued"
    error: dict | None = None
    result: dict | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def transition(self, state: str, *, error: dict | None = None, result: dict | None = None) -> None:
        with self._lock:
            if self.state in TERMINAL:
                raise InvalidState(f"job {self.id} already {self.state}")
            self.state = state
            self.error = error
            self.result = result

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "id": self.id,
                "kind": self.kind,
                "session_id": self.session_id,
                "state": self.state,
                "error": self.error,
                "result": self.result,
            }


class JobRunner:
    """Bounded worker pool plus the one-in-flight-per-session rule."""

    def __init__(self, workers: int = 4):
        self._pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self._jobs: dict[str, Job] = {}
        self._active: dict[str, str] = {}
        self._guard = threading.Lock()

    def get(self, job_id: str) -> Job:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise NotFound(f"no job {job_id}") from None

    def submit(self, kind: str, fn, *, session_id: str | None = None) -> Job:
        """Queue `fn`; its return value (a dict) becomes the job result."""
        job = Job(id=uuid.uuid4().hex, kind=kind, session_id=session_id)
        with self._guard:
            if session_id is not None and session_id in self._active:
                raise InvalidState(
                    f"session {session_id} already has job "
                    f"{self._active[session_id]} in flight"
                )
            self._jobs[job.id] = job
            if session_id is not None:
                self._active[session_id] = job.id

        def run():
            job.transition("running")
            try:
                result = fn()
            except Sketch2PrintError as exc:
                job.transition(
                    "failed", error={"kind": exc.kind, "detail": exc.detail}
                )
            except Exception as exc:  # surfaced, never swallowed silently
                job.transition(
                    "failed", error={"kind": "Internal", "detail": str(exc)}
                )
            else:
                job.transition("succeeded", result=result)
            finally:
                if session_id is not None:
                    with self._guard:
                        self._active.pop(session_id, None)

        self._pool.submit(run)
        return job

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)
