"""HTTP JSON API over the gateway.

Routes:
    POST /v1/sessions                      -> {session_id}
    POST /v1/sessions/{id}/messages        {text, timestamp?}   -> gateway response
    POST /v1/sessions/{id}/clarification   {choice, new_text?}  -> gateway response
    GET  /v1/sessions/{id}/history         -> turn list with per-turn meta
    GET|PUT /v1/sessions/{id}/config       -> session config fields
    GET  /v1/health                        -> {status, upstream_ok, embedder_id}
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .clarification import NoPendingClarification
from .gateway import ClarificationPending, GatewayService, SessionNotFound
from .upstream import UpstreamFailure


class SessionIn(BaseModel):
    config: Optional[dict] = None


class MessageIn(BaseModel):
    text: str
    timestamp: Optional[float] = None


class ChoiceIn(BaseModel):
    choice: str
    new_text: Optional[str] = None
    timestamp: Optional[float] = None


def create_app(service: GatewayService) -> FastAPI:
    app = FastAPI(title="context-alignment gateway", docs_url=None, redoc_url=None)

    @app.exception_handler(SessionNotFound)
    async def _not_found(_: Request, exc: SessionNotFound):
        return JSONResponse(status_code=404, content={"detail": f"unknown session {exc.args[0]!r}"})

    @app.exception_handler(ClarificationPending)
    @app.exception_handler(NoPendingClarification)
    async def _conflict(_: Request, exc: Exception):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(UpstreamFailure)
    async def _upstream(_: Request, exc: UpstreamFailure):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_request(_: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/v1/sessions")
    def create_session(body: Optional[SessionIn] = None):
        overrides = body.config if body and body.config else None
        return {"session_id": service.create_session(overrides)}

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        response = service.handle_message(session_id, body.text, body.timestamp)
        return response.to_wire()

    @app.post("/v1/sessions/{session_id}/clarification")
    def post_clarification(session_id: str, body: ChoiceIn):
        response = service.handle_clarification_reply(
            session_id, body.choice, body.new_text, body.timestamp
        )
        return response.to_wire()

    @app.get("/v1/sessions/{session_id}/history")
    def get_history(session_id: str):
        return {"session_id": session_id, "turns": service.history_of(session_id)}

    @app.get("/v1/sessions/{session_id}/config")
    def get_config(session_id: str):
        return service.config_of(session_id)

    @app.put("/v1/sessions/{session_id}/config")
    def put_config(session_id: str, updates: dict):
        return service.update_config(session_id, updates)

    @app.get("/v1/health")
    def health():
        return service.health()

    return app
