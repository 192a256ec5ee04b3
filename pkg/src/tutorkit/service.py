"""Backend service: tutor CRUD, training sessions, evaluation, transcripts.

Persistence is a transactional embedded document store on the local
filesystem — one directory per tutor holding the layout document, the agent
document, and an append-only transcript log. Every acknowledged message is
fsynced to the log before the response leaves, so a crash between an ack
and session close loses nothing: recovery replays the log's tail over the
last agent snapshot.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Optional

from . import layout as layout_mod
from .errors import (
    NameConflictError,
    NotFoundError,
    ProtocolError,
    SetupIncompleteError,
    StructuralError,
    StructuralMismatchError,
    TutorkitError,
)
from .evalsim import DOMAINS, evaluate, generate
from .htn import KnowledgeBase
from .layout import LayoutTree
from .session import Session, TeacherMessage

DATA_DIR_ENV = "TUTORKIT_DATA_DIR"
BIND_ENV = "TUTORKIT_BIND"

META_FILE = "meta.json"
LAYOUT_FILE = "layout.json"
AGENT_FILE = "agent.json"
TRANSCRIPT_FILE = "transcript.log"


class ConflictError(TutorkitError):
    pass


class AgentBusyError(TutorkitError):
    pass


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _dump(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=True, separators=(",", ":"))


@dataclass
class TutorRecord:
    tutor_id: str
    name: str
    version: int
    created: float
    updated: float
    layout_doc: dict
    agent_doc: dict

    def to_doc(self) -> dict:
        return {
            "id": self.tutor_id,
            "name": self.name,
            "version": self.version,
            "created": self.created,
            "updated": self.updated,
            "layout": self.layout_doc,
            "agent": self.agent_doc,
        }


@dataclass
class SessionHandle:
    session_id: str
    tutor_id: str
    session: Session
    lock: threading.Lock
    pending_log_index: int = 0  # session events already flushed to the log


class Store:
    """Filesystem-backed tutor store with per-event durable logging."""

    def __init__(self, data_dir: str, clock=None):
        self.data_dir = data_dir
        self._clock = clock if clock is not None else time.time
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionHandle] = {}
        self._live_by_tutor: dict[str, str] = {}
        os.makedirs(data_dir, exist_ok=True)

    # -- tutors ----------------------------------------------------------

    def _tutor_dir(self, tutor_id: str) -> str:
        return os.path.join(self.data_dir, tutor_id)

    def create_tutor(self, name: str, layout_doc: dict, agent_doc: Optional[dict] = None) -> TutorRecord:
        tree = layout_mod.from_doc(layout_doc)  # validates structure
        kb = KnowledgeBase.from_doc(agent_doc) if agent_doc else KnowledgeBase()
        _check_agent_layout(kb, tree)
        tutor_id = uuid.uuid4().hex[:12]
        now = self._clock()
        record = TutorRecord(
            tutor_id=tutor_id,
            name=name,
            version=1,
            created=now,
            updated=now,
            layout_doc=layout_mod.to_doc(tree),
            agent_doc=kb.to_doc(),
        )
        path = self._tutor_dir(tutor_id)
        os.makedirs(path)
        self._write_record(record)
        self._append_log(tutor_id, {
            "timestamp": now,
            "actor": "system",
            "event": "agent-snapshot",
            "payload": {"agent": record.agent_doc, "layout": record.layout_doc},
        })
        return record

    def _write_record(self, record: TutorRecord) -> None:
        path = self._tutor_dir(record.tutor_id)
        meta = {
            "id": record.tutor_id,
            "name": record.name,
            "version": record.version,
            "created": record.created,
            "updated": record.updated,
        }
        _atomic_write(os.path.join(path, META_FILE), _dump(meta))
        _atomic_write(os.path.join(path, LAYOUT_FILE), _dump(record.layout_doc))
        _atomic_write(os.path.join(path, AGENT_FILE), _dump(record.agent_doc))

    def get_tutor(self, tutor_id: str) -> TutorRecord:
        path = self._tutor_dir(tutor_id)
        if not os.path.isdir(path):
            raise NotFoundError(f"no tutor {tutor_id!r}")
        meta = self._read_json(os.path.join(path, META_FILE))
        layout_doc = self._read_json(os.path.join(path, LAYOUT_FILE))
        agent_doc = self._read_json(os.path.join(path, AGENT_FILE))
        record = TutorRecord(
            tutor_id=tutor_id,
            name=meta["name"],
            version=meta["version"],
            created=meta["created"],
            updated=meta["updated"],
            layout_doc=layout_doc,
            agent_doc=agent_doc,
        )
        recovered = self._recover_agent(tutor_id)
        if recovered is not None and recovered != record.agent_doc:
            record.agent_doc = recovered
            self._write_record(record)
        return record

    @staticmethod
    def _read_json(path: str) -> dict:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def list_tutors(self) -> list[dict]:
        out = []
        for tutor_id in sorted(os.listdir(self.data_dir)):
            if os.path.isdir(self._tutor_dir(tutor_id)):
                meta = self._read_json(os.path.join(self._tutor_dir(tutor_id), META_FILE))
                out.append(meta)
        return out

    def update_tutor(
        self,
        tutor_id: str,
        version: int,
        name: Optional[str] = None,
        layout_doc: Optional[dict] = None,
        agent_doc: Optional[dict] = None,
    ) -> TutorRecord:
        record = self.get_tutor(tutor_id)
        if version != record.version:
            raise ConflictError(
                f"tutor {tutor_id!r} is at version {record.version}, update targeted {version}"
            )
        if name is not None:
            record.name = name
        if layout_doc is not None:
            record.layout_doc = layout_mod.to_doc(layout_mod.from_doc(layout_doc))
        if agent_doc is not None:
            record.agent_doc = KnowledgeBase.from_doc(agent_doc).to_doc()
        _check_agent_layout(
            KnowledgeBase.from_doc(record.agent_doc),
            layout_mod.from_doc(record.layout_doc),
        )
        record.version += 1
        record.updated = self._clock()
        self._write_record(record)
        self._append_log(tutor_id, {
            "timestamp": record.updated,
            "actor": "system",
            "event": "agent-snapshot",
            "payload": {"agent": record.agent_doc, "layout": record.layout_doc},
        })
        return record

    def delete_tutor(self, tutor_id: str) -> None:
        path = self._tutor_dir(tutor_id)
        if not os.path.isdir(path):
            raise NotFoundError(f"no tutor {tutor_id!r}")
        with self._lock:
            live = self._live_by_tutor.get(tutor_id)
            if live:
                self._sessions.pop(live, None)
                self._live_by_tutor.pop(tutor_id, None)
        for name in os.listdir(path):
            os.unlink(os.path.join(path, name))
        os.rmdir(path)

    # -- transcript log ----------------------------------------------------

    def _log_path(self, tutor_id: str) -> str:
        return os.path.join(self._tutor_dir(tutor_id), TRANSCRIPT_FILE)

    def _append_log(self, tutor_id: str, doc: dict) -> None:
        with open(self._log_path(tutor_id), "a", encoding="utf-8") as fh:
            fh.write(_dump(doc) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def read_log(self, tutor_id: str) -> list[dict]:
        if not os.path.isdir(self._tutor_dir(tutor_id)):
            raise NotFoundError(f"no tutor {tutor_id!r}")
        path = self._log_path(tutor_id)
        if not os.path.exists(path):
            return []
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def _recover_agent(self, tutor_id: str) -> Optional[dict]:
        """Rebuild the agent from the last snapshot plus any trailing session
        events (a session that never closed)."""
        lines = self.read_log(tutor_id)
        snapshot_index = None
        for i, doc in enumerate(lines):
            if doc.get("event") == "agent-snapshot":
                snapshot_index = i
        if snapshot_index is None:
            return None
        snapshot = lines[snapshot_index]["payload"]
        tail = lines[snapshot_index + 1:]
        teacher_events = [d for d in tail if d.get("actor") == "teacher"]
        if not teacher_events:
            return snapshot["agent"]
        session = Session(
            layout=layout_mod.from_doc(snapshot["layout"]),
            kb=KnowledgeBase.from_doc(snapshot["agent"]),
        )
        for doc in teacher_events:
            if doc["event"].startswith("layout-"):
                continue
            session.step(TeacherMessage.from_doc(doc["payload"]))
        return session.kb.to_doc()

    # -- sessions ----------------------------------------------------------

    def open_session(self, tutor_id: str) -> SessionHandle:
        record = self.get_tutor(tutor_id)
        with self._lock:
            if tutor_id in self._live_by_tutor:
                raise AgentBusyError(
                    f"another live session already holds the agent of tutor {tutor_id!r}"
                )
            session = Session(
                layout=layout_mod.from_doc(record.layout_doc),
                kb=KnowledgeBase.from_doc(record.agent_doc),
            )
            handle = SessionHandle(
                session_id=uuid.uuid4().hex[:12],
                tutor_id=tutor_id,
                session=session,
                lock=threading.Lock(),
            )
            self._sessions[handle.session_id] = handle
            self._live_by_tutor[tutor_id] = handle.session_id
        self._append_log(tutor_id, {
            "timestamp": self._clock(),
            "actor": "system",
            "event": "session-open",
            "payload": {"session": handle.session_id},
        })
        return handle

    def get_session(self, session_id: str) -> SessionHandle:
        handle = self._sessions.get(session_id)
        if handle is None:
            raise NotFoundError(f"no session {session_id!r}")
        return handle

    def post_message(self, session_id: str, message_doc: dict) -> dict:
        handle = self.get_session(session_id)
        with handle.lock:
            msg = TeacherMessage.from_doc(message_doc)
            reply = handle.session.step(msg)
            # persist every event this step produced before acknowledging
            events = handle.session.events
            for event in events[handle.pending_log_index:]:
                doc = event.to_doc()
                doc["session"] = session_id
                self._append_log(handle.tutor_id, doc)
            handle.pending_log_index = len(events)
            return {
                "agent": reply.to_doc() if reply is not None else None,
                "phase": handle.session.phase,
                "legal": list(handle.session.legal_messages()),
            }

    def close_session(self, session_id: str) -> None:
        handle = self.get_session(session_id)
        with handle.lock:
            record = self.get_tutor(handle.tutor_id)
            record.agent_doc = handle.session.kb.to_doc()
            record.version += 1
            record.updated = self._clock()
            self._write_record(record)
            self._append_log(handle.tutor_id, {
                "timestamp": record.updated,
                "actor": "system",
                "event": "agent-snapshot",
                "payload": {"agent": record.agent_doc, "layout": record.layout_doc},
            })
        with self._lock:
            self._sessions.pop(session_id, None)
            if self._live_by_tutor.get(handle.tutor_id) == session_id:
                del self._live_by_tutor[handle.tutor_id]

    # -- evaluation ----------------------------------------------------------

    def evaluate_tutor(self, tutor_id: str, domain: str, count: int, seed: int) -> dict:
        record = self.get_tutor(tutor_id)
        if domain not in DOMAINS:
            raise StructuralMismatchError(f"unknown domain {domain!r}")
        kb = KnowledgeBase.from_doc(record.agent_doc)
        problems = generate(domain, count, seed)
        report = evaluate(kb, problems, layout=layout_mod.from_doc(record.layout_doc))
        return report.to_doc()


def _check_agent_layout(kb: KnowledgeBase, tree: LayoutTree) -> None:
    missing = sorted(kb.referenced_fields() - set(tree.input_names()))
    if missing:
        raise StructuralMismatchError(
            "agent references fields absent from the layout: " + ", ".join(missing)
        )


# -- HTTP app ----------------------------------------------------------------


def create_app(store: Optional[Store] = None):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    if store is None:
        store = Store(os.environ.get(DATA_DIR_ENV, "./tutorkit-data"))

    app = FastAPI(title="tutorkit service")
    app.state.store = store

    def _error(status: int, exc: Exception, **extra):
        body = {"error": str(exc), **extra}
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(TutorkitError)
    async def handle_tutorkit_error(request: Request, exc: TutorkitError):
        if isinstance(exc, NotFoundError):
            return _error(404, exc)
        if isinstance(exc, (ConflictError, AgentBusyError)):
            return _error(409, exc)
        if isinstance(exc, ProtocolError):
            return _error(409, exc, expected=list(exc.expected))
        if isinstance(exc, (StructuralMismatchError, StructuralError, NameConflictError,
                            SetupIncompleteError)):
            return _error(422, exc)
        return _error(422, exc)

    @app.post("/tutors", status_code=201)
    async def create_tutor(body: dict):
        record = store.create_tutor(
            name=body.get("name", "untitled"),
            layout_doc=body["layout"],
            agent_doc=body.get("agent"),
        )
        return record.to_doc()

    @app.get("/tutors")
    async def list_tutors():
        return {"tutors": store.list_tutors()}

    @app.get("/tutors/{tutor_id}")
    async def get_tutor(tutor_id: str):
        return store.get_tutor(tutor_id).to_doc()

    @app.put("/tutors/{tutor_id}")
    async def update_tutor(tutor_id: str, body: dict):
        return store.update_tutor(
            tutor_id,
            version=body["version"],
            name=body.get("name"),
            layout_doc=body.get("layout"),
            agent_doc=body.get("agent"),
        ).to_doc()

    @app.delete("/tutors/{tutor_id}", status_code=204)
    async def delete_tutor(tutor_id: str):
        store.delete_tutor(tutor_id)

    @app.post("/tutors/{tutor_id}/sessions", status_code=201)
    async def open_session(tutor_id: str):
        handle = store.open_session(tutor_id)
        return {
            "session": handle.session_id,
            "phase": handle.session.phase,
            "legal": list(handle.session.legal_messages()),
        }

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: dict):
        return store.post_message(session_id, body["message"])

    @app.delete("/sessions/{session_id}", status_code=204)
    async def close_session(session_id: str):
        store.close_session(session_id)

    @app.post("/tutors/{tutor_id}/evaluate")
    async def evaluate_tutor(tutor_id: str, body: dict):
        return store.evaluate_tutor(
            tutor_id,
            domain=body["domain"],
            count=int(body.get("count", 10)),
            seed=int(body.get("seed", 0)),
        )

    @app.get("/tutors/{tutor_id}/transcripts")
    async def get_transcripts(tutor_id: str):
        return {"events": store.read_log(tutor_id)}

    return app


def main() -> None:
    import uvicorn

    bind = os.environ.get(BIND_ENV, "127.0.0.1:8756")
    host, _, port = bind.partition(":")
    uvicorn.run(create_app(), host=host or "127.0.0.1", port=int(port or 8756))
