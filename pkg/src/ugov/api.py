"""HTTP surface for the console and external agent processes.

A pure facade: handlers hold no state beyond references to the registry (and
optionally a stepped simulation); every response body is canonical JSON, and
the event feed is a long-lived NDJSON stream of audit entries.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response, StreamingResponse

from . import canonical
from .errors import (
    ForbiddenError,
    GovernanceError,
    UnknownCursorError,
    UnknownTargetError,
    ValidationError,
    WrongStateError,
)
from .lifecycle import export_transition_table
from .registry import Registry
from .service import EscalationService, HumanDecision

TOKEN_FILE_ENV = "UR_TOKEN_FILE"
DEFAULT_PORT = 7340

_STATUS_BY_ERROR = (
    (UnknownCursorError, 400),
    (UnknownTargetError, 404),
    (WrongStateError, 409),
    (ForbiddenError, 403),
    (ValidationError, 422),
)


def _canonical_response(payload, status_code: int = 200) -> Response:
    return Response(
        content=canonical.dumps(payload) + "\n",
        media_type="application/json",
        status_code=status_code,
    )


def _load_tokens() -> dict[str, str]:
    path = os.environ.get(TOKEN_FILE_ENV)
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def create_app(registry: Registry, sim=None) -> FastAPI:
    app = FastAPI(title="uncertainty governance api", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    service = EscalationService(registry)
    tokens = _load_tokens()

    @app.exception_handler(GovernanceError)
    async def governance_error(request: Request, exc: GovernanceError):
        status = 400
        for cls, code in _STATUS_BY_ERROR:
            if isinstance(exc, cls):
                status = code
                break
        return _canonical_response(
            {"error": type(exc).__name__, "detail": str(exc)}, status_code=status
        )

    def identity(request: Request) -> Optional[str]:
        """Resolve the acting human from the bearer token map, if configured."""
        if not tokens:
            return None
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        if token not in tokens:
            raise ForbiddenError("unknown or missing bearer token")
        return tokens[token]

    @app.get("/escalations")
    def list_escalations(status: Optional[str] = None, limit: Optional[int] = None):
        tasks = service.list_escalations(status=status, limit=limit)
        return _canonical_response([t.to_json() for t in tasks])

    @app.get("/escalations/{task_id}")
    def get_escalation(task_id: str):
        return _canonical_response(service.get_task(task_id).to_json())

    @app.get("/records/{record_id}")
    def get_record(record_id: str):
        record = registry.get(record_id)
        history = registry.history(record_id)
        return _canonical_response(
            {"record": record.to_json(), "history": [e.to_json() for e in history]}
        )

    @app.get("/records/{record_id}/history")
    def get_history(record_id: str):
        return _canonical_response([e.to_json() for e in registry.history(record_id)])

    @app.post("/escalations/{task_id}/claim")
    async def claim(task_id: str, request: Request, human: Optional[str] = Depends(identity)):
        body = await request.json() if await request.body() else {}
        human_id = human or body.get("human_id", "operator")
        return _canonical_response(service.claim(task_id, human_id).to_json())

    @app.post("/escalations/{task_id}/decision")
    async def decide(task_id: str, request: Request, human: Optional[str] = Depends(identity)):
        body = await request.json()
        body = dict(body)
        body["task_id"] = task_id
        if human is not None:
            body["human_id"] = human
        body.setdefault("human_id", "operator")
        decision = HumanDecision.from_json(body)
        entries = service.submit_decision(decision)
        return _canonical_response([e.to_json() for e in entries])

    @app.get("/events")
    def stream_events(since: int = 0, follow: int = 0):
        last = registry.last_event_id
        if since < 0 or since > last:
            raise UnknownCursorError(f"cursor {since} is not a known event id")

        def generate():
            cursor = since
            for entry in registry.entries(cursor):
                cursor = entry.event.id
                yield canonical.dumps_line(entry.to_json())
            while follow:
                for entry in registry.wait_for_entries(cursor, timeout=0.25):
                    cursor = entry.event.id
                    yield canonical.dumps_line(entry.to_json())

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.get("/snapshot")
    def snapshot():
        return Response(
            content=registry.snapshot().canonical_text() + "\n",
            media_type="application/json",
        )

    @app.get("/transition-table")
    def transition_table():
        return _canonical_response(export_transition_table())

    @app.post("/scenario/step")
    def scenario_step():
        if sim is None:
            raise UnknownTargetError("no scenario attached to this server")
        return _canonical_response(sim.step())

    return app
