"""HTTP/WebSocket wiring around a LectureEngine.

Endpoints:
    POST /glossaries           upload JSONL, returns {"version": hash}
    GET  /glossaries           list registered versions
    POST /sessions             create a session, returns {"session_id": id}
    GET  /sessions/{id}        session status and latency stats
    WS   /sessions/{id}/ingest transcript line protocol in, JSON acks out
    WS   /sessions/{id}/subscribe
                               client: hello / suppress
                               server: welcome / cue / gap / suppress_ack /
                               retract / error

Each WebSocket frame carries one message: a protocol line (ingest) or one
JSON object (everywhere else).
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.websockets import WebSocket, WebSocketDisconnect

from .engine import (
    EngineError,
    InvalidConfig,
    LectureEngine,
    SecondIngestRejected,
    UnknownGlossary,
    UnknownSession,
)
from .glossary import InvalidGlossary, ParseError, compile_glossary, parse_glossary


def _error_payload(exc: Exception) -> dict:
    return {"type": "error", "error": type(exc).__name__, "detail": str(exc)}


def create_app(engine: LectureEngine) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        engine.close()

    app = FastAPI(title="lexicue", lifespan=lifespan)
    app.state.engine = engine

    @app.post("/glossaries")
    async def upload_glossary(request: Request) -> JSONResponse:
        body = (await request.body()).decode("utf-8")
        try:
            entries = parse_glossary(body)
            compiled = compile_glossary(entries)
        except ParseError as exc:
            return JSONResponse(_error_payload(exc), status_code=400)
        except InvalidGlossary as exc:
            payload = _error_payload(exc)
            payload["diagnostics"] = [str(d) for d in exc.diagnostics]
            return JSONResponse(payload, status_code=400)
        version = engine.add_glossary(compiled)
        return JSONResponse({"version": version}, status_code=201)

    @app.get("/glossaries")
    async def list_glossaries() -> dict:
        return {"versions": engine.glossary_versions}

    @app.post("/sessions")
    async def create_session(request: Request) -> JSONResponse:
        body = await request.json() if await request.body() else {}
        try:
            session_id = engine.create_session(
                glossary=body.get("glossary"),
                mode=body.get("mode", "finals_only"),
                cooldown_ms=body.get("cooldown_ms", 120_000),
            )
        except UnknownGlossary as exc:
            return JSONResponse(_error_payload(exc), status_code=404)
        except InvalidConfig as exc:
            return JSONResponse(_error_payload(exc), status_code=400)
        return JSONResponse({"session_id": session_id}, status_code=201)

    @app.get("/sessions/{session_id}")
    async def session_status(session_id: str) -> JSONResponse:
        try:
            return JSONResponse(engine.session_status(session_id))
        except UnknownSession as exc:
            return JSONResponse(_error_payload(exc), status_code=404)

    @app.websocket("/sessions/{session_id}/ingest")
    async def ingest_socket(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        try:
            engine.acquire_ingest(session_id)
        except (UnknownSession, SecondIngestRejected) as exc:
            await websocket.send_json(_error_payload(exc))
            await websocket.close()
            return
        try:
            while True:
                text = await websocket.receive_text()
                for line in text.split("\n"):
                    if not line:
                        continue
                    ack = engine.ingest_line(session_id, line)
                    await websocket.send_json(ack.to_message())
        except WebSocketDisconnect:
            pass
        finally:
            engine.release_ingest(session_id)

    @app.websocket("/sessions/{session_id}/subscribe")
    async def subscribe_socket(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        try:
            hello = await websocket.receive_json()
        except WebSocketDisconnect:
            return
        if not isinstance(hello, dict) or hello.get("type") != "hello":
            await websocket.send_json(
                {"type": "error", "error": "ProtocolError", "detail": "expected hello"}
            )
            await websocket.close()
            return
        resume_from = hello.get("resume_from")
        try:
            subscriber = engine.subscribe(
                session_id,
                language=str(hello.get("lang", "")),
                resume_from=int(resume_from) if resume_from is not None else None,
                client_id=hello.get("client_id"),
            )
        except EngineError as exc:
            await websocket.send_json(_error_payload(exc))
            await websocket.close()
            return

        loop = asyncio.get_running_loop()
        ready = asyncio.Event()
        subscriber.queue.set_notifier(lambda: loop.call_soon_threadsafe(ready.set))
        ready.set()  # welcome and any replayed cues are already queued

        async def sender() -> None:
            while True:
                await ready.wait()
                ready.clear()
                while (message := subscriber.queue.pop()) is not None:
                    await websocket.send_json(message)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                message = await websocket.receive_json()
                kind = message.get("type") if isinstance(message, dict) else None
                if kind == "suppress":
                    try:
                        engine.suppress_term(
                            session_id, subscriber.client_id, int(message["term_id"])
                        )
                    except (EngineError, KeyError, TypeError, ValueError) as exc:
                        subscriber.queue.push(_error_payload(exc))
                else:
                    subscriber.queue.push(
                        {
                            "type": "error",
                            "error": "ProtocolError",
                            "detail": f"unknown message type {kind!r}",
                        }
                    )
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            try:
                await send_task
            except asyncio.CancelledError:
                pass
            engine.unsubscribe(session_id, subscriber.client_id)

    return app
