"""HTTP face of the engine.

Endpoints (all JSON; the event stream is newline-delimited JSON records):

    POST /sessions                    {user_id} -> {session_id}
    GET  /sessions                    live session summaries
    POST /sessions/{id}/samples       {location, samples: [{t,ax,ay,az}]}
    GET  /sessions/{id}/status        state snapshot
    GET  /sessions/{id}/events        ?follow=true|false event stream
    POST /sessions/{id}/actions       {action}
"""

from __future__ import annotations

import json
import queue
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from ..errors import (
    InvalidTransition,
    JawprintError,
    SessionNotActive,
    SessionNotFound,
    UnknownLocation,
    UnknownUser,
)
from ..verifiers import load_model
from .config import ServiceConfig
from .engine import STATUS_TERMINATED, AuthEngine, WarningPolicy, WindowScorer


class SampleIn(BaseModel):
    t: float
    ax: float
    ay: float
    az: float


class SampleBatch(BaseModel):
    location: str
    samples: list[SampleIn]


class CreateSessionRequest(BaseModel):
    user_id: str


class CreateSessionResponse(BaseModel):
    session_id: str


class EventOut(BaseModel):
    session_id: str
    window_index: int
    kind: str
    score: float | None
    threshold: float | None
    timestamp: float


class StatusOut(BaseModel):
    session_id: str
    user_id: str
    status: str
    window_count: int
    failure_count: int
    consecutive_failures: int
    recent_scores: list[float | None]
    event_count: int


class SessionSummary(BaseModel):
    session_id: str
    user_id: str
    status: str
    window_count: int


class ActionRequest(BaseModel):
    action: Literal["terminate", "request_stepup", "mark_verified"]


class IngestResponse(BaseModel):
    events: list[EventOut]


def load_scorers(model_dir, classifier: str) -> dict:
    """Enrolled users from `<model_dir>/thresholds.json` plus model files."""
    model_dir = Path(model_dir)
    index_path = model_dir / "thresholds.json"
    if not index_path.is_file():
        return {}
    index = json.loads(index_path.read_text(encoding="utf-8"))
    scorers = {}
    for user_id, entry in index.get("users", {}).items():
        record = entry.get(classifier)
        if record is None:
            continue
        model = load_model(model_dir / record["model"])
        scorers[user_id] = WindowScorer(model, record["threshold"], record.get("mode", "fused"))
    return scorers


def create_app(engine: AuthEngine) -> FastAPI:
    app = FastAPI(title="jawprint auth service")
    app.state.engine = engine

    def translate(err: JawprintError) -> HTTPException:
        if isinstance(err, (UnknownUser, SessionNotFound)):
            return HTTPException(status_code=404, detail=str(err))
        if isinstance(err, (SessionNotActive, InvalidTransition)):
            return HTTPException(status_code=409, detail=str(err))
        if isinstance(err, UnknownLocation):
            return HTTPException(status_code=400, detail=str(err))
        return HTTPException(status_code=500, detail=str(err))

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest):
        try:
            return CreateSessionResponse(session_id=engine.create_session(req.user_id))
        except JawprintError as err:
            raise translate(err) from None

    @app.get("/sessions", response_model=list[SessionSummary])
    def list_sessions():
        out = []
        for sid in engine.session_ids():
            st = engine.get_status(sid)
            out.append(
                SessionSummary(
                    session_id=st.session_id,
                    user_id=st.user_id,
                    status=st.status,
                    window_count=st.window_count,
                )
            )
        return out

    @app.post("/sessions/{session_id}/samples", response_model=IngestResponse)
    def ingest(session_id: str, batch: SampleBatch):
        samples = [(s.t, s.ax, s.ay, s.az) for s in batch.samples]
        try:
            events = engine.ingest_samples(session_id, batch.location, samples)
        except JawprintError as err:
            raise translate(err) from None
        return IngestResponse(events=[EventOut(**e.to_dict()) for e in events])

    @app.get("/sessions/{session_id}/status", response_model=StatusOut)
    def status(session_id: str):
        try:
            return StatusOut(**engine.get_status(session_id).to_dict())
        except JawprintError as err:
            raise translate(err) from None

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, follow: bool = False):
        try:
            engine.get_status(session_id)
        except JawprintError as err:
            raise translate(err) from None

        def replay():
            for ev in engine.events_snapshot(session_id):
                yield json.dumps(ev.to_dict()) + "\n"

        def live():
            snapshot, q = engine.subscribe(session_id)
            try:
                for ev in snapshot:
                    yield json.dumps(ev.to_dict()) + "\n"
                terminated = any(ev.kind == "terminated" for ev in snapshot)
                while not terminated:
                    try:
                        ev = q.get(timeout=0.5)
                    except queue.Empty:
                        yield ""  # keep-alive; lets disconnects surface
                        continue
                    yield json.dumps(ev.to_dict()) + "\n"
                    terminated = ev.kind == "terminated"
            finally:
                engine.unsubscribe(session_id, q)

        gen = live() if follow else replay()
        return StreamingResponse(gen, media_type="application/x-ndjson")

    @app.post("/sessions/{session_id}/actions", response_model=StatusOut)
    def action(session_id: str, req: ActionRequest):
        try:
            return StatusOut(**engine.operator_action(session_id, req.action).to_dict())
        except JawprintError as err:
            raise translate(err) from None

    return app


def build_app(config: ServiceConfig) -> FastAPI:
    scorers = load_scorers(config.model_dir, config.classifier)
    engine = AuthEngine(scorers, policy=config.policy)
    return create_app(engine)
