"""HTTP annotation service.

Thin JSON layer over SessionManager. Every error leaves as the envelope
{"error": <code>, "detail": <message>} with a matching status code, so
clients never have to parse framework-specific error bodies.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    ConflictError,
    NotFoundError,
    ParameterError,
    SessionStateError,
    SupercdError,
)
from .sessions import SessionManager
from .store import SessionStore

_ERROR_MAP: list[tuple[type, int, str]] = [
    (NotFoundError, 404, "not_found"),
    (ConflictError, 409, "conflict"),
    (SessionStateError, 409, "state"),
    (ParameterError, 400, "validation"),
]


def _envelope(exc: Exception) -> JSONResponse:
    for etype, status, code in _ERROR_MAP:
        if isinstance(exc, etype):
            return JSONResponse(
                status_code=status, content={"error": code, "detail": str(exc)}
            )
    return JSONResponse(
        status_code=400, content={"error": "validation", "detail": str(exc)}
    )


def create_app(store_root: str | Path) -> FastAPI:
    store = SessionStore(store_root)
    manager = SessionManager(store)
    app = FastAPI(title="supercd annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(SupercdError)
    async def _supercd_error(request: Request, exc: SupercdError):
        return _envelope(exc)

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"error": "internal", "detail": str(exc)}
        )

    @app.post("/sessions")
    def create_session(payload: dict):
        return manager.create_session(payload)

    @app.get("/sessions")
    def list_sessions():
        return manager.list_sessions()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.get_state(session_id)

    @app.post("/sessions/{session_id}/annotations")
    def submit(session_id: str, payload: dict):
        records = payload.get("records")
        if not isinstance(records, list) or not records:
            raise ParameterError("body must carry a non-empty 'records' list")
        return manager.submit_annotations(
            session_id, records, annotator=payload.get("annotator")
        )

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        return manager.get_result(session_id)

    return app


def run_service(store_root: str | Path, host: str, port: int) -> None:
    import uvicorn

    uvicorn.run(create_app(store_root), host=host, port=port, log_level="warning")
