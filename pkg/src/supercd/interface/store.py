"""On-disk session persistence: one directory per session, atomic writes.

Layout under the store root:

    <session_id>/state.json    status, request echo, pending queue, collected records
    <session_id>/trace.json    pipeline trace captured at creation
    <session_id>/result.json   written once the session finalizes

Every write goes through a temp file followed by os.replace, so a crash never
leaves a half-written JSON behind. Callers serialize access per session via
``lock_for``.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from ..errors import NotFoundError


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = threading.Lock()
                self._locks[session_id] = lock
            return lock

    def new_session_id(self) -> str:
        with self._registry_lock:
            existing = {p.name for p in self.root.iterdir() if p.is_dir()}
            n = 0
            while f"sess{n:04d}" in existing:
                n += 1
            session_id = f"sess{n:04d}"
            (self.root / session_id).mkdir()
            return session_id

    def list_sessions(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "state.json").is_file()
        )

    def exists(self, session_id: str) -> bool:
        return (self.root / session_id / "state.json").is_file()

    def _path(self, session_id: str, name: str) -> Path:
        return self.root / session_id / name

    def _write(self, session_id: str, name: str, payload: dict) -> None:
        target = self._path(session_id, name)
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
            newline="\n",
        )
        os.replace(tmp, target)

    def _read(self, session_id: str, name: str) -> dict:
        path = self._path(session_id, name)
        if not path.is_file():
            raise NotFoundError(f"session file not found: {path}")
        return json.loads(path.read_text(encoding="utf-8"))

    def write_state(self, session_id: str, state: dict) -> None:
        self._write(session_id, "state.json", state)

    def read_state(self, session_id: str) -> dict:
        if not self.exists(session_id):
            raise NotFoundError(f"no such session: {session_id}")
        return self._read(session_id, "state.json")

    def write_trace(self, session_id: str, trace: dict) -> None:
        self._write(session_id, "trace.json", trace)

    def read_trace(self, session_id: str) -> dict:
        return self._read(session_id, "trace.json")

    def write_result(self, session_id: str, result: dict) -> None:
        self._write(session_id, "result.json", result)

    def read_result(self, session_id: str) -> dict:
        return self._read(session_id, "result.json")

    def has_result(self, session_id: str) -> bool:
        return self._path(session_id, "result.json").is_file()
