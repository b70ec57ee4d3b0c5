"""HTTP surface: catalog, settings, lifecycle, status, and log streaming.

Single-operator tool: no authentication, binds to localhost by default.
Log streaming is server-sent events with one JSON object per event.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

from fastapi import Body, FastAPI, Query
from fastapi.responses import JSONResponse, StreamingResponse

from .context import AppContext
from .errors import (
    EngineFailureError,
    NotFoundError,
    StackAlreadyActiveError,
    UnknownStackError,
    ValidationFailedError,
)
from .monitor import multiplex_logs, poll_snapshot
from .orchestrator import Policy, SessionState
from .stacks import manifest_to_dict


class ApiCode(str, Enum):
    UNKNOWN_STACK = "UNKNOWN_STACK"
    UNKNOWN_SERVICE = "UNKNOWN_SERVICE"
    NO_ACTIVE_SESSION = "NO_ACTIVE_SESSION"
    STACK_ALREADY_ACTIVE = "STACK_ALREADY_ACTIVE"
    VALIDATION_FAILED = "VALIDATION_FAILED"
    SETTINGS_LOCKED = "SETTINGS_LOCKED"
    ENGINE_FAILURE = "ENGINE_FAILURE"


_HTTP_STATUS = {
    ApiCode.UNKNOWN_STACK: 404,
    ApiCode.UNKNOWN_SERVICE: 404,
    ApiCode.NO_ACTIVE_SESSION: 404,
    ApiCode.STACK_ALREADY_ACTIVE: 409,
    ApiCode.VALIDATION_FAILED: 422,
    ApiCode.SETTINGS_LOCKED: 423,
    ApiCode.ENGINE_FAILURE: 500,
}


def _error(code: ApiCode, message: str, **extra) -> JSONResponse:
    return JSONResponse(
        status_code=_HTTP_STATUS[code],
        content={"code": code.value, "message": message, **extra},
    )


def create_app(ctx: AppContext, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="labcube", version="0.1.0")
    orch = ctx.orchestrator

    @app.get("/api/stacks")
    def list_stacks():
        entries = []
        for item in ctx.catalog.entries:
            manifest = item.manifest
            _, _, report, _ = orch.prepare(manifest.name)
            entries.append(
                {
                    "name": manifest.name,
                    "generation": manifest.generation.value,
                    "description": manifest.description,
                    "service_count": len(manifest.services),
                    "findings": len(report.findings),
                }
            )
        return {
            "stacks": entries,
            "findings": [f.to_dict() for f in ctx.catalog_findings],
        }

    @app.get("/api/stacks/{name}")
    def get_stack(name: str):
        manifest = ctx.catalog.get(name)
        if manifest is None:
            return _error(ApiCode.UNKNOWN_STACK, f"stack {name!r} not in catalog")
        _, _, report, _ = orch.prepare(name)
        return {"manifest": manifest_to_dict(manifest), "report": report.to_dict()}

    @app.post("/api/stacks/{name}/start", status_code=202)
    def start_stack(name: str, payload: dict = Body(default={})):
        policy_token = payload.get("policy", Policy.REJECT_IF_ACTIVE.value)
        try:
            policy = Policy(policy_token)
        except ValueError:
            return _error(ApiCode.VALIDATION_FAILED, f"unknown policy {policy_token!r}")
        emulated = bool(payload.get("emulated", False))
        try:
            session = orch.start_stack(name, policy=policy, emulated=emulated)
        except UnknownStackError as exc:
            return _error(ApiCode.UNKNOWN_STACK, str(exc))
        except StackAlreadyActiveError as exc:
            return _error(ApiCode.STACK_ALREADY_ACTIVE, str(exc), active=exc.current)
        except ValidationFailedError as exc:
            return _error(ApiCode.VALIDATION_FAILED, str(exc), report=exc.report.to_dict())
        except EngineFailureError as exc:
            return _error(ApiCode.ENGINE_FAILURE, str(exc))
        return {"session": session.to_dict()}

    @app.post("/api/stacks/{name}/stop", status_code=202)
    def stop_stack(name: str):
        if ctx.catalog.get(name) is None:
            return _error(ApiCode.UNKNOWN_STACK, f"stack {name!r} not in catalog")
        session = orch.active_session() or orch.last_session()
        if session is None or session.stack not in (name, name + "-emulated"):
            return {"stopped": False}
        if session.state in (SessionState.STOPPED,):
            return {"stopped": False}
        try:
            orch.stop_stack(session)
        except EngineFailureError as exc:
            return _error(ApiCode.ENGINE_FAILURE, str(exc))
        return {"stopped": True}

    @app.get("/api/status")
    def status():
        snapshot = poll_snapshot(orch.active_session(), orch.endpoints)
        body = snapshot.to_dict()
        session = orch.active_session() or orch.last_session()
        body["session"] = session.to_dict() if session else None
        return body

    @app.get("/api/logs")
    def logs(service: str | None = Query(default=None), follow: bool = Query(default=False)):
        session = orch.active_session()
        if session is None:
            return _error(ApiCode.NO_ACTIVE_SESSION, "no stack is active")
        services = [service] if service else None
        try:
            events = multiplex_logs(session, orch.endpoints, services=services, follow=follow)
        except NotFoundError as exc:
            return _error(ApiCode.UNKNOWN_SERVICE, f"unknown service {exc.ref!r}")

        def stream():
            for event in events:
                yield f"event: log\ndata: {json.dumps(event.to_dict())}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/settings")
    def get_settings():
        return {
            "settings": dict(ctx.global_settings.entries),
            "warnings": list(ctx.global_settings.warnings),
        }

    @app.put("/api/settings")
    def put_settings(payload: dict = Body(...)):
        if orch.active_session() is not None:
            return _error(ApiCode.SETTINGS_LOCKED, "settings are locked while a session is active")
        values = payload.get("settings", payload)
        if not isinstance(values, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in values.items()
        ):
            return _error(ApiCode.VALIDATION_FAILED, "settings must map keys to string values")
        try:
            updated = ctx.update_settings(values, require_idle=True)
        except StackAlreadyActiveError:
            return _error(ApiCode.SETTINGS_LOCKED, "settings are locked while a session is active")
        except ValidationFailedError as exc:
            return _error(ApiCode.VALIDATION_FAILED, str(exc), report=exc.report.to_dict())
        except ValueError as exc:
            return _error(ApiCode.VALIDATION_FAILED, str(exc))
        return {"settings": dict(updated.entries)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
