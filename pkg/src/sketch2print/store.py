"""Persistence backbone: content-addressed blobs and per-session event logs.

Layout under a data directory:

    data_dir/blobs/ab/cdef...        one file per SHA-256, first byte as shard
    data_dir/sessions/<id>.jsonl     one JSON event per line

Event lines carry {seq, ts, type, payload, crc32} where crc32 covers the
canonical JSON of the other four fields. A trailing corrupt line is
truncated on load (crash tolerance); a gap or mid-log corruption raises
CorruptLog. Appends take an advisory file lock, so one writer wins per
session at a time.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import os
import tempfile
import time
import zlib
from pathlib import Path

from .errors import CorruptLog, IoFailure, NotFound, SequenceConflict

logger = logging.getLogger(__name__)

EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class BlobStore:
    """Immutable blobs keyed by the SHA-256 of their bytes."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest[2:]

    def put(self, data: bytes) -> str:
        digest = sha256_hex(data)
        path = self._path(digest)
        if path.exists():
            return digest
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            # Write-temp-then-rename keeps concurrent identical puts lock-free.
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise IoFailure(f"blob write failed: {exc}") from exc
        return digest

    def get(self, digest: str) -> bytes:
        path = self._path(digest)
        if not path.exists():
            raise NotFound(f"no blob {digest}")
        return path.read_bytes()

    def exists(self, digest: str) -> bool:
        return self._path(digest).exists()

    def all_hashes(self) -> list[str]:
        hashes = []
        for shard in sorted(self.root.iterdir()) if self.root.exists() else []:
            if shard.is_dir():
                hashes += sorted(shard.name + f.name for f in shard.iterdir())
        return hashes

    def delete(self, digest: str) -> bool:
        path = self._path(digest)
        if path.exists():
            path.unlink()
            return True
        return False


class EventLog:
    """Append-only JSON-lines event logs, one file per session."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise NotFound(f"invalid session id {session_id!r}")
        return self.root / f"{session_id}.jsonl"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def append(
        self,
        session_id: str,
        event_type: str,
        payload: dict,
        *,
        expected_seq: int | None = None,
        create: bool = False,
    ) -> dict:
        """Append one event and return the full record as written.

        With `expected_seq` set, the append only succeeds if it would get
        exactly that sequence number; otherwise SequenceConflict, which a
        loser of a write race sees instead of silently interleaving.
        """
        path = self._path(session_id)
        if not path.exists() and not create:
            raise NotFound(f"no session {session_id}")
        try:
            with open(path, "a+", encoding="utf-8") as handle:
                fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
                handle.seek(0)
                last_seq = 0
                for line in handle:
                    line = line.strip()
                    if line:
                        last_seq += 1
                next_seq = last_seq + 1
                if expected_seq is not None and next_seq != expected_seq:
                    raise SequenceConflict(
                        f"expected to write seq {expected_seq}, log is at {last_seq}"
                    )
                record = {
                    "seq": next_seq,
                    "ts": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
                    + f".{int(time.time_ns() % 1_000_000_000) // 1000:06d}Z",
                    "type": event_type,
                    "payload": payload,
                }
                body = _canonical(record)
                record["crc32"] = zlib.crc32(body.encode("utf-8"))
                handle.write(_canonical(record) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
                # Round-trip through JSON so the caller sees exactly the
                # shapes a later read() will produce (tuples become lists).
                return json.loads(body)
        except OSError as exc:
            raise IoFailure(f"event append failed: {exc}") from exc

    def read(self, session_id: str) -> list[dict]:
        """Read all events, validating contiguity and per-line checksums.

        A corrupt or torn final line is dropped with a warning; corruption
        anywhere else raises CorruptLog.
        """
        path = self._path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        raw_lines = path.read_text(encoding="utf-8").splitlines()
        events: list[dict] = []
        for lineno, line in enumerate(raw_lines):
            is_last = lineno == len(raw_lines) - 1
            if not line.strip():
                if is_last:
                    continue
                raise CorruptLog(f"blank line {lineno + 1} in {session_id}")
            try:
                record = json.loads(line)
                crc = record.pop("crc32")
                ok = crc == zlib.crc32(_canonical(record).encode("utf-8"))
            except (json.JSONDecodeError, KeyError, TypeError):
                record, ok = None, False
            if not ok:
                if is_last:
                    logger.warning(
                        "truncating torn final event line in session %s", session_id
                    )
                    continue
                raise CorruptLog(f"bad line {lineno + 1} in {session_id}")
            if record["seq"] != len(events) + 1:
                raise CorruptLog(
                    f"sequence gap in {session_id}: expected {len(events) + 1}, got {record['seq']}"
                )
            events.append(record)
        return events


class DataStore:
    """Blob store + event log rooted at one data directory."""

    def __init__(self, data_dir: Path | str):
        self.data_dir = Path(data_dir)
        self.blobs = BlobStore(self.data_dir / "blobs")
        self.events = EventLog(self.data_dir / "sessions")

    def collect_garbage(self, referenced: set[str]) -> list[str]:
        """Delete blobs not in `referenced`; returns the deleted hashes.

        Explicit only; nothing calls this automatically.
        """
        deleted = []
        for digest in self.blobs.all_hashes():
            if digest not in referenced:
                self.blobs.delete(digest)
                deleted.append(digest)
        return deleted
