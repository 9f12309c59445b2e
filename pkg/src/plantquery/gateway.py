"""HTTP service exposing sessions, turns, history, audit access, and eval runs."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import plantdb
from .audit import AuditStore, MissingSessionError, PathKind, StepKind
from .backends import make_backend
from .config import AppConfig
from .evalkit import HermeticComparison, JudgeKind, load_cases_file, run_comparison
from .nl2sql import NL2SQL_PROMPT, Nl2SqlPipeline, SchemaCatalog, load_examples_file
from .orchestrator import (
    ConversationState,
    ErrorCode,
    MAIN_AGENT_PROMPT,
    Orchestrator,
    TurnStatus,
)
from .plantdb import PlantDb
from .toolkit import (
    FunctionRegistry,
    SubAgentDomain,
    default_domains,
    default_jargon,
    default_registry,
    load_registry_file,
)


class ApiError(Exception):
    """Caller-visible failure; 4xx for caller faults, 5xx for system faults."""

    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class Services:
    """Shared read-only dependencies built once from configuration."""

    config: AppConfig
    db: PlantDb
    audit_store: AuditStore
    registry: FunctionRegistry
    domains: list[SubAgentDomain]
    catalog: SchemaCatalog
    examples: list[Any]
    jargon: list[Any]

    @classmethod
    def from_config(cls, config: AppConfig) -> "Services":
        for path in (config.plant_db_path, config.audit_db_path):
            parent = str(path).rsplit("/", 1)
            if len(parent) == 2:
                import os

                os.makedirs(parent[0], exist_ok=True)
        db = plantdb.init_schema(config.plant_db_path)
        if not any(db.table_counts().values()):
            plantdb.seed_fixture(db, config.seed)
        registry = (
            load_registry_file(config.registry_path) if config.registry_path else default_registry()
        )
        domains = default_domains(registry)
        if config.domain_prompts:
            domains = [
                SubAgentDomain(
                    domain=d.domain,
                    system_prompt=config.domain_prompts.get(d.domain.value, d.system_prompt),
                    functions=d.functions,
                )
                for d in domains
            ]
        return cls(
            config=config,
            db=db,
            audit_store=AuditStore(config.audit_db_path),
            registry=registry,
            domains=domains,
            catalog=SchemaCatalog.from_db(db),
            examples=load_examples_file(config.examples_file()),
            jargon=default_jargon(),
        )


@dataclass
class Session:
    session_id: str
    created_at: str
    path: PathKind
    backend_mode: str
    state: ConversationState
    orchestrator: Orchestrator | None = None
    pipeline: Nl2SqlPipeline | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def handle(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "path": self.path.value,
            "backend_mode": self.backend_mode,
        }


class SessionManager:
    def __init__(self, services: Services):
        self.services = services
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, path: PathKind, backend_mode: str) -> Session:
        services = self.services
        config = services.config
        backend = make_backend(config.backend_config(backend_mode))
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        if path is PathKind.FUNCTION_CALLING:
            state = ConversationState.new(
                session_id, system_prompt=config.main_prompt or MAIN_AGENT_PROMPT
            )
            session = Session(
                session_id=session_id,
                created_at=datetime.now(timezone.utc).isoformat(),
                path=path,
                backend_mode=backend_mode,
                state=state,
                orchestrator=Orchestrator(
                    backend,
                    services.registry,
                    services.domains,
                    services.db,
                    services.audit_store,
                    jargon=services.jargon,
                    r_route=config.r_route,
                    r_func=config.r_func,
                ),
            )
        else:
            state = ConversationState.new(session_id, system_prompt=NL2SQL_PROMPT)
            session = Session(
                session_id=session_id,
                created_at=datetime.now(timezone.utc).isoformat(),
                path=path,
                backend_mode=backend_mode,
                state=state,
                pipeline=Nl2SqlPipeline(
                    services.db,
                    backend,
                    services.catalog,
                    services.examples,
                    services.audit_store,
                    threshold=config.similarity_threshold,
                    max_attempts=config.r_func,
                ),
            )
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session


class EvalRuns:
    def __init__(self) -> None:
        self._runs: dict[str, dict[str, Any]] = {}
        self._lock = threading.Lock()

    def start(self, target, *args) -> str:
        run_id = f"run-{uuid.uuid4().hex[:12]}"
        with self._lock:
            self._runs[run_id] = {"status": "running", "report": None, "error": None}

        def work() -> None:
            try:
                report = target(*args)
                with self._lock:
                    self._runs[run_id] = {
                        "status": "done", "report": report.to_dict(), "error": None,
                    }
            except Exception as exc:  # noqa: BLE001 - reported through the API
                with self._lock:
                    self._runs[run_id] = {"status": "failed", "report": None, "error": str(exc)}

        threading.Thread(target=work, daemon=True).start()
        return run_id

    def get(self, run_id: str) -> dict[str, Any]:
        with self._lock:
            run = self._runs.get(run_id)
        if run is None:
            raise ApiError(404, "unknown_run", f"no eval run {run_id!r}")
        return run


class CreateSessionRequest(BaseModel):
    path: str = Field(description="FUNCTION_CALLING or NL2SQL")
    backend_mode: str = Field(default="RULES", description="HTTP, SCRIPTED, or RULES")


class MessageRequest(BaseModel):
    text: str = Field(min_length=1)


class EvalRequest(BaseModel):
    cases_path: str | None = None
    profile: str = "hermetic"


def _turn_payload(session: Session, outcome: Any) -> dict[str, Any]:
    if session.path is PathKind.FUNCTION_CALLING:
        return {
            "answer": outcome.answer,
            "status": outcome.status.value,
            "tool_trace": [t.to_dict() for t in outcome.tool_trace],
            "route_attempts": outcome.route_attempts,
            "function_attempts": outcome.function_attempts,
            "nl2sql": None,
        }
    # Baseline drafts are never exposed without their fix list attached.
    return {
        "answer": outcome.answer,
        "status": outcome.status.value,
        "tool_trace": [],
        "nl2sql": {
            "draft": outcome.draft.to_dict() if outcome.draft else None,
            "failed_step": outcome.failed_step,
            "row_count": outcome.result.row_count if outcome.result else 0,
        },
    }


def create_app(services: Services) -> FastAPI:
    app = FastAPI(title="plantquery gateway")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[services.config.cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions = SessionManager(services)
    eval_runs = EvalRuns()
    app.state.services = services
    app.state.sessions = sessions

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"status": exc.status, "code": exc.code, "message": exc.message},
        )

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict[str, Any]:
        try:
            path = PathKind(request.path)
        except ValueError:
            raise ApiError(400, "invalid_path", f"path must be one of "
                           f"{[p.value for p in PathKind]}") from None
        if request.backend_mode.upper() not in {"HTTP", "SCRIPTED", "RULES"}:
            raise ApiError(400, "invalid_backend_mode", "backend_mode must be HTTP, SCRIPTED, or RULES")
        try:
            session = sessions.create(path, request.backend_mode.upper())
        except ValueError as exc:
            raise ApiError(400, "invalid_backend_config", str(exc)) from None
        return session.handle()

    @app.post("/api/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, request: MessageRequest) -> dict[str, Any]:
        session = sessions.get(session_id)
        with session.lock:
            if session.orchestrator is not None:
                outcome = session.orchestrator.handle_turn(session.state, request.text)
                last_error = session.orchestrator.last_error
                if (
                    outcome.status is TurnStatus.FAILED
                    and last_error is not None
                    and last_error.code is ErrorCode.BACKEND_FAILURE
                ):
                    raise ApiError(502, "backend_failure", last_error.detail)
            else:
                assert session.pipeline is not None
                outcome = session.pipeline.run(session.state, request.text)
        return _turn_payload(session, outcome)

    @app.get("/api/v1/sessions/{session_id}/history")
    def get_history(session_id: str) -> list[dict[str, Any]]:
        session = sessions.get(session_id)
        with session.lock:
            return [m.to_dict() for m in session.state.messages]

    @app.get("/api/v1/audit/records")
    def get_audit_records(
        session_id: str | None = None,
        step_kind: str | None = None,
        path: str | None = None,
    ) -> list[dict[str, Any]]:
        try:
            kind = StepKind(step_kind) if step_kind else None
            path_kind = PathKind(path) if path else None
        except ValueError as exc:
            raise ApiError(400, "invalid_filter", str(exc)) from None
        records = services.audit_store.query_records(
            session_id=session_id, step_kind=kind, path=path_kind
        )
        return [r.to_dict() for r in records]

    @app.post("/api/v1/eval/run", status_code=202)
    def start_eval(request: EvalRequest) -> dict[str, Any]:
        if request.profile != "hermetic":
            raise ApiError(400, "invalid_profile", "only the hermetic profile runs in-process")
        cases = load_cases_file(request.cases_path or services.config.cases_file())
        comparison = HermeticComparison(
            db=services.db,
            registry=services.registry,
            domains=services.domains,
            catalog=services.catalog,
            examples=services.examples,
            audit_store=services.audit_store,
            jargon=services.jargon,
            threshold=services.config.similarity_threshold,
            r_route=services.config.r_route,
            r_func=services.config.r_func,
        )
        run_id = eval_runs.start(
            run_comparison, cases, comparison.runners(), JudgeKind.RULES
        )
        return {"run_id": run_id, "status": "running"}

    @app.get("/api/v1/eval/runs/{run_id}")
    def get_eval_run(run_id: str) -> dict[str, Any]:
        return eval_runs.get(run_id)

    @app.get("/api/v1/sessions/{session_id}/replay")
    def get_replay(session_id: str) -> list[dict[str, Any]]:
        try:
            messages = services.audit_store.replay_conversation(session_id)
        except MissingSessionError as exc:
            raise ApiError(404, "unknown_session", str(exc)) from None
        return [m.to_dict() for m in messages]

    return app


def create_app_from_config(config: AppConfig) -> FastAPI:
    return create_app(Services.from_config(config))
