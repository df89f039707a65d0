"""HTTP API for interactive schema curation.

Sessions are single-writer: every mutation goes through a per-session lock
and optimistic concurrency (the client sends the document version it saw;
a stale version gets 409). Each session persists as its initial document
plus an append-only envelope log, so a restarted service recovers state by
replaying the log.

Environment: ``PORT`` (serve port, default 8000) and ``DATA_DIR`` (session
store, default ``./sci-data``). All routes live under ``/v1``.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from pathlib import Path
from typing import Any, Optional

from fastapi import APIRouter, FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import edits
from .edits import DocumentSession, EditError
from .graph import build_graph_view
from .induction import (
    BackendFailure,
    EmptyGeneration,
    InconsistentEdges,
    InductionConfig,
    InductionInput,
    QnodeCatalog,
    StubBackend,
    run_induction,
)
from .instantiation import (
    EventInstance,
    MatcherConfig,
    MissingProvenance,
    Stoplist,
    coverage_stats,
    run_pipeline,
)
from .sdf import SdfError, document_to_object, parse_object, serialize_schema, validate


def _error(status: int, code: str, message: str, **extra: Any) -> JSONResponse:
    payload = {"code": code, "message": message}
    payload.update(extra)
    return JSONResponse(status_code=status, content={"error": payload})


class SessionStore:
    """In-memory sessions backed by an on-disk (initial document + log) pair."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self._sessions: dict[str, DocumentSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _paths(self, schema_id: str) -> tuple[Path, Path]:
        base = self.data_dir / schema_id
        return base / "initial.json", base / "log.jsonl"

    def create(self, document) -> str:
        schema_id = uuid.uuid4().hex[:12]
        session = DocumentSession(document)
        initial_path, log_path = self._paths(schema_id)
        initial_path.parent.mkdir(parents=True, exist_ok=True)
        initial_path.write_bytes(serialize_schema(document))
        log_path.write_text("", encoding="utf-8")
        with self._registry_lock:
            self._sessions[schema_id] = session
            self._locks[schema_id] = threading.Lock()
        return schema_id

    def _load_from_disk(self, schema_id: str) -> Optional[DocumentSession]:
        initial_path, log_path = self._paths(schema_id)
        if not initial_path.exists():
            return None
        session = DocumentSession(parse_object(json.loads(initial_path.read_bytes())))
        if log_path.exists():
            for line in log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    envelope = json.loads(line)
                    session.apply(envelope["op"], envelope["args"])
        return session

    def get(self, schema_id: str) -> Optional[DocumentSession]:
        with self._registry_lock:
            session = self._sessions.get(schema_id)
            if session is not None:
                return session
        session = self._load_from_disk(schema_id)
        if session is not None:
            with self._registry_lock:
                self._sessions.setdefault(schema_id, session)
                self._locks.setdefault(schema_id, threading.Lock())
                session = self._sessions[schema_id]
        return session

    def lock(self, schema_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks[schema_id]

    def append_log(self, schema_id: str, op: str, args: dict) -> None:
        _, log_path = self._paths(schema_id)
        with log_path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps({"op": op, "args": args}, ensure_ascii=False) + "\n")


async def _read_json_body(request: Request) -> Any:
    raw = await request.body()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(str(exc)) from exc


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("DATA_DIR", "./sci-data"))
    store = SessionStore(data_dir)
    app = FastAPI(title="schema curation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    router = APIRouter(prefix="/v1")

    @router.post("/schemas", status_code=201)
    async def upload_schema(request: Request):
        try:
            body = await _read_json_body(request)
        except ValueError as exc:
            return _error(400, "MalformedJson", str(exc))
        try:
            document = parse_object(body)
        except SdfError as exc:
            return _error(400, type(exc).__name__, str(exc))
        schema_id = store.create(document)
        report = validate(document)
        return JSONResponse(
            status_code=201,
            content={
                "schema_id": schema_id,
                "doc_version": document.doc_version,
                "validation": report.to_jsonable(),
            },
        )

    def _session_or_none(schema_id: str) -> Optional[DocumentSession]:
        return store.get(schema_id)

    @router.get("/schemas/{schema_id}/graph")
    def get_graph(schema_id: str):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        return build_graph_view(session.current).to_jsonable()

    @router.get("/schemas/{schema_id}/document")
    def get_document(schema_id: str):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        return Response(content=serialize_schema(session.current), media_type="application/json")

    @router.get("/schemas/{schema_id}/validation")
    def get_validation(schema_id: str):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        return {
            "doc_version": session.doc_version,
            "validation": validate(session.current).to_jsonable(),
        }

    @router.get("/schemas/{schema_id}/entities")
    def get_entities(schema_id: str):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        return [entry.to_jsonable() for entry in edits.list_entities(session.current)]

    @router.post("/schemas/{schema_id}/ops")
    async def post_op(schema_id: str, request: Request):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        try:
            envelope = await _read_json_body(request)
        except ValueError as exc:
            return _error(400, "MalformedJson", str(exc))
        if not isinstance(envelope, dict) or "op" not in envelope:
            return _error(422, "BadArgs", "envelope must carry 'op', 'args', 'expect_version'")
        op = envelope["op"]
        args = envelope.get("args") or {}
        expect_version = envelope.get("expect_version")
        if expect_version is None:
            return _error(422, "BadArgs", "expect_version is required")
        with store.lock(schema_id):
            if expect_version != session.doc_version:
                return _error(
                    409,
                    "VersionConflict",
                    f"expected version '{expect_version}' but document is at "
                    f"'{session.doc_version}'",
                    current_version=session.doc_version,
                )
            try:
                result = session.apply(op, args)
            except EditError as exc:
                return _error(422, exc.code, str(exc))
            store.append_log(schema_id, op, args)
        return {"doc_version": result.doc_version, "created_ids": result.created_ids}

    @router.put("/schemas/{schema_id}/document")
    async def put_document(schema_id: str, request: Request, expect_version: Optional[str] = None):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        try:
            body = await _read_json_body(request)
        except ValueError as exc:
            return _error(400, "MalformedJson", str(exc))
        try:
            replacement = parse_object(body)
        except SdfError as exc:
            return _error(400, type(exc).__name__, str(exc))
        with store.lock(schema_id):
            if expect_version is not None and expect_version != session.doc_version:
                return _error(
                    409,
                    "VersionConflict",
                    f"expected version '{expect_version}' but document is at "
                    f"'{session.doc_version}'",
                    current_version=session.doc_version,
                )
            args = {"document": body}
            try:
                session.apply(edits.OP_REPLACE_DOCUMENT, args)
            except EditError as exc:
                return _error(422, exc.code, str(exc))
            store.append_log(schema_id, edits.OP_REPLACE_DOCUMENT, args)
        return {
            "doc_version": session.doc_version,
            "validation": validate(replacement).to_jsonable(),
        }

    @router.post("/induction/run", status_code=201)
    async def induction_run(request: Request):
        try:
            body = await _read_json_body(request)
        except ValueError as exc:
            return _error(400, "MalformedJson", str(exc))
        if not isinstance(body, dict):
            return _error(422, "BadArgs", "body must be an object")
        try:
            input_spec = InductionInput(
                scenario_name=body["scenario"],
                chapters=list(body["chapters"]),
                articles=list(body.get("articles", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, "BadArgs", f"bad induction input: {exc}")
        if "fixture" in body:
            fixture = body["fixture"]
        elif "fixture_path" in body:
            try:
                fixture = json.loads(Path(body["fixture_path"]).read_text(encoding="utf-8"))
            except OSError as exc:
                return _error(422, "FixtureMissing", str(exc))
        else:
            return _error(422, "BadArgs", "provide 'fixture' or 'fixture_path'")
        catalog = None
        if "catalog" in body:
            catalog = QnodeCatalog.from_jsonable(body["catalog"])
        elif "catalog_path" in body:
            try:
                catalog = QnodeCatalog.from_file(body["catalog_path"])
            except OSError as exc:
                return _error(422, "CatalogMissing", str(exc))
        config_args = body.get("config") or {}
        try:
            config = InductionConfig(**config_args)
        except (TypeError, ValueError) as exc:
            return _error(422, "BadArgs", f"bad config: {exc}")
        try:
            document = run_induction(
                StubBackend(fixture), input_spec, config=config, catalog=catalog
            )
        except (BackendFailure, EmptyGeneration) as exc:
            return _error(422, type(exc).__name__, str(exc))
        except InconsistentEdges as exc:
            return _error(500, "InconsistentEdges", str(exc))
        schema_id = store.create(document)
        return JSONResponse(
            status_code=201,
            content={
                "schema_id": schema_id,
                "doc_version": document.doc_version,
                "document": document_to_object(document),
            },
        )

    @router.post("/schemas/{schema_id}/coverage")
    async def post_coverage(schema_id: str, request: Request, tau: Optional[float] = None):
        session = _session_or_none(schema_id)
        if session is None:
            return _error(404, "SchemaNotFound", f"no schema '{schema_id}'")
        try:
            body = await _read_json_body(request)
        except ValueError as exc:
            return _error(400, "MalformedJson", str(exc))
        stoplist = None
        if isinstance(body, dict):
            rows = body.get("instances", [])
            tau = body.get("tau", tau)
            if "stoplist" in body:
                stoplist = Stoplist(body["stoplist"])
        else:
            rows = body
        if not isinstance(rows, list):
            return _error(400, "BadArgs", "instances must be a JSON array")
        try:
            instances = [EventInstance.from_jsonable(row) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, "BadArgs", f"bad instance row: {exc}")
        config = MatcherConfig()
        if tau is not None:
            try:
                config = MatcherConfig(similarity_threshold=float(tau))
            except ValueError as exc:
                return _error(422, "BadArgs", str(exc))
        worklist, recovered, _ = run_pipeline(instances, session.current, config, stoplist)
        try:
            stats = coverage_stats([session.current])
        except MissingProvenance as exc:
            return _error(422, "MissingProvenance", str(exc))
        return {
            "worklist": worklist,
            "stats": stats.to_jsonable(),
            "recovered": [inst.to_jsonable() for inst in recovered],
        }

    app.include_router(router)
    return app


app = create_app()


def main() -> None:
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=int(os.environ.get("PORT", "8000")))


if __name__ == "__main__":
    main()
