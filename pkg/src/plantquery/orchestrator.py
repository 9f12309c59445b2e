"""Routed function-calling workflow: main agent, domain sub-agents, bounded retries.

One turn flows: jargon-expanded user text to the main agent, which either
answers directly or routes to a domain sub-agent; the sub-agent picks a
registered function, its arguments are schema-validated with feedback on
failure, validated calls execute through the registry chokepoint, and the
sub-agent's text answer closes the turn. Inappropriate sub-agent responses
trigger re-routing to a different domain. Every step is audited and all
model calls are charged against a per-turn budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from . import schemaguard, toolkit
from .audit import AuditError, AuditStore, PathKind, StepKind
from .backends import (
    Backend,
    BackendResponse,
    ChatMessage,
    NO_CAPABILITY_SENTINEL,
    ResponseKind,
    Role,
    ROUTE_TOOL_PREFIX,
    ToolDescriptor,
    TransientBackendError,
)
from .backends.rules import wants_formatting_followup
from .plantdb import PlantDb, PlantDbError
from .schemaguard import Dtype, ParamSchema, RetryPolicy
from .toolkit import Domain, FunctionRegistry, JargonEntry, SubAgentDomain

DEFAULT_R_ROUTE = 2
DEFAULT_R_FUNC = 3

MAIN_AGENT_PROMPT = (
    "You are the router for the plant-maintenance data assistant. Either answer the user "
    "directly or hand the question to exactly one domain assistant via its routing tool. "
    "Questions answerable from data already retrieved in this conversation, such as "
    "formatting requests, must be answered directly without new retrieval."
)

APOLOGY_ANSWER = (
    "Sorry, I could not retrieve that information from the maintenance database. "
    "Please try rephrasing your question."
)


class TurnStatus(Enum):
    OK = "OK"
    NO_DATA = "NO_DATA"
    FAILED = "FAILED"


class ErrorCode(Enum):
    NO_MATCHING_FUNCTION = "NO_MATCHING_FUNCTION"
    VALIDATION_EXHAUSTED = "VALIDATION_EXHAUSTED"
    BACKEND_FAILURE = "BACKEND_FAILURE"
    DB_FAILURE = "DB_FAILURE"
    ROUTE_EXHAUSTED = "ROUTE_EXHAUSTED"


class AgentError(Exception):
    def __init__(self, code: ErrorCode, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code.value}: {detail}")


class _BudgetExhausted(Exception):
    pass


@dataclass
class ConversationState:
    """Ordered message history for one session; first message is the system prompt."""

    session_id: str
    messages: list[ChatMessage]
    turn_counter: int = 0

    @classmethod
    def new(cls, session_id: str, system_prompt: str = MAIN_AGENT_PROMPT) -> "ConversationState":
        return cls(
            session_id=session_id,
            messages=[ChatMessage(role=Role.SYSTEM, content=system_prompt)],
        )

    def transcript_json(self) -> str:
        return json.dumps([m.to_dict() for m in self.messages], sort_keys=True)


class RouteKind(Enum):
    DIRECT_ANSWER = "DIRECT_ANSWER"
    ROUTE = "ROUTE"


@dataclass(frozen=True)
class RoutingDecision:
    kind: RouteKind
    target_domain: Domain | None = None
    rationale: str = ""

    def __post_init__(self) -> None:
        if (self.kind is RouteKind.ROUTE) != (self.target_domain is not None):
            raise ValueError("target_domain present iff kind is ROUTE")


@dataclass(frozen=True)
class ToolTraceEntry:
    function: str
    arguments: dict[str, Any]
    row_count: int

    @property
    def result_summary(self) -> str:
        return f"{self.row_count} rows"

    def to_dict(self) -> dict[str, Any]:
        return {
            "function": self.function,
            "arguments": dict(self.arguments),
            "row_count": self.row_count,
        }


@dataclass(frozen=True)
class TurnOutcome:
    answer: str
    tool_trace: tuple[ToolTraceEntry, ...]
    route_attempts: int
    function_attempts: int
    status: TurnStatus

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "tool_trace": [t.to_dict() for t in self.tool_trace],
            "route_attempts": self.route_attempts,
            "function_attempts": self.function_attempts,
            "status": self.status.value,
        }


@dataclass
class _TurnContext:
    turn: int
    budget: int
    calls_used: int = 0

    def consume(self) -> int:
        if self.calls_used >= self.budget:
            raise _BudgetExhausted()
        self.calls_used += 1
        return self.calls_used


def route_tool_name(domain: Domain) -> str:
    return ROUTE_TOOL_PREFIX + domain.value.lower()


def build_route_descriptor(domain_def: SubAgentDomain) -> ToolDescriptor:
    return ToolDescriptor(
        name=route_tool_name(domain_def.domain),
        description=(
            f"Hand the question to the {domain_def.domain.value.replace('_', ' ').lower()} "
            f"assistant. Handles: {', '.join(domain_def.functions)}."
        ),
        parameters=(ParamSchema("query", Dtype.STRING, description="the question to forward"),),
    )


def is_followup_resolvable(state: ConversationState, user_text: str) -> bool:
    """Heuristic mirror of the follow-up decision the model makes during routing.

    The binding contract is observable, not procedural: when prior tool results
    suffice, no new database query occurs. This predicate reproduces the rules
    backend's criterion for tests and UI hints.
    """
    if state.turn_counter == 0:
        return False
    return wants_formatting_followup(state.messages, user_text)


class Orchestrator:
    """Drives turns for one or more sessions against shared read-only deps."""

    def __init__(
        self,
        backend: Backend,
        registry: FunctionRegistry,
        domains: Sequence[SubAgentDomain],
        db: PlantDb,
        audit_store: AuditStore,
        jargon: Sequence[JargonEntry] = (),
        r_route: int = DEFAULT_R_ROUTE,
        r_func: int = DEFAULT_R_FUNC,
    ):
        self.backend = backend
        self.registry = registry
        self.domains = list(domains)
        self.db = db
        self.audit_store = audit_store
        self.jargon = list(jargon)
        self.r_route = r_route
        self.r_func = r_func
        self.audit_failures = 0
        # Error behind the most recent FAILED outcome; None after a clean turn.
        self.last_error: AgentError | None = None

    # -- plumbing ----------------------------------------------------------

    def _audit(
        self, state: ConversationState, turn: int, step: StepKind, payload: dict[str, Any]
    ) -> None:
        try:
            self.audit_store.append(
                session_id=state.session_id,
                turn=turn,
                step_kind=step,
                payload=payload,
                path=PathKind.FUNCTION_CALLING,
            )
        except AuditError:
            # Audit loss must never abort the user's turn.
            self.audit_failures += 1

    def _complete(
        self,
        messages: Sequence[ChatMessage],
        tools: Sequence[ToolDescriptor],
        ctx: _TurnContext,
        state: ConversationState,
    ) -> tuple[BackendResponse, int]:
        for attempt in (1, 2):
            call_index = ctx.consume()
            try:
                return self.backend.complete(messages, tools), call_index
            except TransientBackendError as exc:
                self._audit(
                    state,
                    ctx.turn,
                    StepKind.RETRY,
                    {"kind": "backend_transient", "detail": str(exc), "call_index": call_index},
                )
                if attempt == 2:
                    raise AgentError(ErrorCode.BACKEND_FAILURE, str(exc)) from exc
        raise AssertionError("unreachable")

    # -- main flow ----------------------------------------------------------

    def handle_turn(self, state: ConversationState, user_text: str) -> TurnOutcome:
        """Run one user turn end to end; always returns an outcome with an answer."""
        state.turn_counter += 1
        turn = state.turn_counter
        self.last_error = None
        ctx = _TurnContext(turn=turn, budget=1 + self.r_route * (1 + self.r_func))

        expanded = toolkit.expand_jargon(user_text, self.jargon)
        user_msg = ChatMessage(role=Role.USER, content=expanded)
        payload: dict[str, Any] = {"raw_text": user_text, "message": user_msg.to_dict()}
        if turn == 1:
            payload["system_message"] = state.messages[0].to_dict()
        self._audit(state, turn, StepKind.USER_QUERY, payload)
        state.messages.append(user_msg)

        remaining = list(self.domains)
        route_attempts = 0
        last_error: AgentError | None = None

        try:
            while True:
                decision, call_index = self._main_decision(state, remaining, ctx)
                if decision.kind is RouteKind.DIRECT_ANSWER:
                    # The direct answer text rides in the decision rationale.
                    return self._finish(
                        state, ctx, decision.rationale, trace=(), route_attempts=route_attempts,
                        function_attempts=0,
                    )
                assert decision.target_domain is not None
                domain_def = next(d for d in remaining if d.domain is decision.target_domain)
                route_attempts += 1
                self._audit(
                    state,
                    turn,
                    StepKind.ROUTE,
                    {
                        "decision": "ROUTE",
                        "domain": decision.target_domain.value,
                        "attempt": route_attempts,
                        "call_index": call_index,
                    },
                )
                try:
                    answer, trace, function_attempts = self._sub_agent_loop(
                        domain_def, state, ctx
                    )
                    return self._finish(
                        state, ctx, answer, trace, route_attempts, function_attempts
                    )
                except AgentError as exc:
                    last_error = exc
                    remaining = [d for d in remaining if d.domain is not decision.target_domain]
                    reroute_payload: dict[str, Any] = {
                        "kind": "reroute",
                        "failed_domain": decision.target_domain.value,
                        "code": exc.code.value,
                        "detail": exc.detail,
                    }
                    if route_attempts < self.r_route and remaining:
                        note = ChatMessage(
                            role=Role.SYSTEM,
                            content=(
                                f"The {decision.target_domain.value.lower()} assistant could not "
                                "answer this question. Route it to a different domain."
                            ),
                        )
                        state.messages.append(note)
                        reroute_payload["feedback_message"] = note.to_dict()
                        self._audit(state, turn, StepKind.RETRY, reroute_payload)
                        continue
                    self._audit(state, turn, StepKind.RETRY, reroute_payload)
                    raise AgentError(
                        ErrorCode.ROUTE_EXHAUSTED,
                        f"no domain could answer after {route_attempts} routes "
                        f"(last: {exc.code.value})",
                    ) from exc
        except (_BudgetExhausted, AgentError) as exc:
            error = (
                exc
                if isinstance(exc, AgentError)
                else AgentError(ErrorCode.ROUTE_EXHAUSTED, "turn backend-call budget exhausted")
            )
            self.last_error = error
            self._audit(
                state,
                turn,
                StepKind.FAULT,
                {
                    "code": error.code.value,
                    "detail": error.detail,
                    "last_error": last_error.code.value if last_error else None,
                },
            )
            return self._finish(
                state,
                ctx,
                APOLOGY_ANSWER,
                trace=(),
                route_attempts=route_attempts,
                function_attempts=0,
                status=TurnStatus.FAILED,
            )

    def _finish(
        self,
        state: ConversationState,
        ctx: _TurnContext,
        answer: str,
        trace: tuple[ToolTraceEntry, ...],
        route_attempts: int,
        function_attempts: int,
        status: TurnStatus | None = None,
    ) -> TurnOutcome:
        if status is None:
            if trace and all(t.row_count == 0 for t in trace):
                status = TurnStatus.NO_DATA
            else:
                status = TurnStatus.OK
        answer_msg = ChatMessage(role=Role.ASSISTANT, content=answer)
        state.messages.append(answer_msg)
        self._audit(
            state,
            ctx.turn,
            StepKind.ANSWER,
            {
                "message": answer_msg.to_dict(),
                "status": status.value,
                "backend_calls": ctx.calls_used,
                "route_attempts": route_attempts,
                "function_attempts": function_attempts,
            },
        )
        return TurnOutcome(
            answer=answer,
            tool_trace=trace,
            route_attempts=route_attempts,
            function_attempts=function_attempts,
            status=status,
        )

    def _main_decision(
        self,
        state: ConversationState,
        remaining: Sequence[SubAgentDomain],
        ctx: _TurnContext,
    ) -> tuple[RoutingDecision, int]:
        """Consult the main agent until it yields a direct answer or a valid route."""
        descriptors = [build_route_descriptor(d) for d in remaining]
        by_name = {d.name: d for d in descriptors}
        policy = RetryPolicy(max_attempts=self.r_func)
        validation_attempts = 0
        while True:
            response, call_index = self._complete(state.messages, descriptors, ctx, state)
            if response.kind is ResponseKind.TEXT:
                assert response.text is not None
                self._audit(
                    state,
                    ctx.turn,
                    StepKind.ROUTE,
                    {"decision": "DIRECT_ANSWER", "call_index": call_index},
                )
                return RoutingDecision(
                    kind=RouteKind.DIRECT_ANSWER, rationale=response.text
                ), call_index
            envelope = response.tool_call
            assert envelope is not None
            schemas = by_name[envelope.tool_name].parameters if envelope.tool_name in by_name else ()
            report = schemaguard.validate(envelope, schemas, set(by_name))
            if report.ok:
                domain = Domain(envelope.tool_name[len(ROUTE_TOOL_PREFIX):].upper())
                return RoutingDecision(
                    kind=RouteKind.ROUTE,
                    target_domain=domain,
                    rationale=f"model selected {envelope.tool_name}",
                ), call_index
            validation_attempts += 1
            fail_payload: dict[str, Any] = {
                "stage": "routing",
                "violations": [v.to_dict() for v in report.violations],
                "call_index": call_index,
            }
            if validation_attempts >= policy.max_attempts:
                self._audit(state, ctx.turn, StepKind.VALIDATION_FAIL, fail_payload)
                raise AgentError(
                    ErrorCode.VALIDATION_EXHAUSTED,
                    f"routing call invalid after {validation_attempts} attempts: "
                    f"{schemaguard.format_violations(report)}",
                )
            feedback = ChatMessage(
                role=Role.SYSTEM, content=schemaguard.render_feedback(report, policy)
            )
            state.messages.append(feedback)
            fail_payload["feedback_message"] = feedback.to_dict()
            self._audit(state, ctx.turn, StepKind.VALIDATION_FAIL, fail_payload)

    # -- sub agents ----------------------------------------------------------

    def sub_agent_turn(
        self, domain_def: SubAgentDomain, state: ConversationState
    ) -> tuple[str, tuple[ToolTraceEntry, ...], int]:
        """Run one sub-agent dispatch outside the routed flow (mainly for tests)."""
        ctx = _TurnContext(turn=state.turn_counter, budget=1 + self.r_func)
        return self._sub_agent_loop(domain_def, state, ctx)

    def _sub_agent_loop(
        self,
        domain_def: SubAgentDomain,
        state: ConversationState,
        ctx: _TurnContext,
    ) -> tuple[str, tuple[ToolTraceEntry, ...], int]:
        if not domain_def.functions:
            raise AgentError(
                ErrorCode.NO_MATCHING_FUNCTION, f"domain {domain_def.domain.value} has no functions"
            )
        descriptors = [toolkit.tool_descriptor(self.registry.get(n)) for n in domain_def.functions]
        known = set(domain_def.functions)
        policy = RetryPolicy(max_attempts=self.r_func)
        trace: list[ToolTraceEntry] = []
        function_attempts = 0

        while True:
            view = [
                ChatMessage(role=Role.SYSTEM, content=domain_def.system_prompt),
                *state.messages[1:],
            ]
            response, call_index = self._complete(view, descriptors, ctx, state)
            if response.kind is ResponseKind.TEXT:
                assert response.text is not None
                if NO_CAPABILITY_SENTINEL in response.text:
                    raise AgentError(
                        ErrorCode.NO_MATCHING_FUNCTION,
                        f"{domain_def.domain.value} declined: no applicable function",
                    )
                return response.text, tuple(trace), function_attempts

            envelope = response.tool_call
            assert envelope is not None
            function_attempts += 1
            if function_attempts > self.r_func:
                raise AgentError(
                    ErrorCode.VALIDATION_EXHAUSTED,
                    f"sub-agent exceeded {self.r_func} function attempts",
                )
            schemas = (
                self.registry.get(envelope.tool_name).params if envelope.tool_name in known else ()
            )
            report = schemaguard.validate(envelope, schemas, known)
            if not report.ok:
                fail_payload: dict[str, Any] = {
                    "stage": "sub_agent",
                    "domain": domain_def.domain.value,
                    "violations": [v.to_dict() for v in report.violations],
                    "call_index": call_index,
                }
                if function_attempts >= self.r_func:
                    self._audit(state, ctx.turn, StepKind.VALIDATION_FAIL, fail_payload)
                    raise AgentError(
                        ErrorCode.VALIDATION_EXHAUSTED,
                        f"function call invalid after {function_attempts} attempts: "
                        f"{schemaguard.format_violations(report)}",
                    )
                feedback = ChatMessage(
                    role=Role.SYSTEM, content=schemaguard.render_feedback(report, policy)
                )
                state.messages.append(feedback)
                fail_payload["feedback_message"] = feedback.to_dict()
                self._audit(state, ctx.turn, StepKind.VALIDATION_FAIL, fail_payload)
                continue

            assert report.coerced_arguments is not None
            call_msg = ChatMessage(role=Role.ASSISTANT, content="", tool_call=envelope)
            state.messages.append(call_msg)
            self._audit(
                state,
                ctx.turn,
                StepKind.TOOL_CALL,
                {
                    "message": call_msg.to_dict(),
                    "domain": domain_def.domain.value,
                    "call_index": call_index,
                },
            )
            fn = self.registry.get(envelope.tool_name)
            try:
                result = toolkit.invoke(
                    envelope.tool_name, report.coerced_arguments, self.db, self.registry
                )
            except PlantDbError as exc:
                raise AgentError(ErrorCode.DB_FAILURE, str(exc)) from exc
            self._audit(
                state,
                ctx.turn,
                StepKind.SQL_EXECUTED,
                {
                    "sql": fn.sql_template,
                    "bindings": [report.coerced_arguments.get(p) for p in fn.binding_order],
                    "origin": "REGISTERED_TEMPLATE",
                    "function": fn.name,
                    "row_count": result.row_count,
                },
            )
            tool_content = {
                "function": fn.name,
                "arguments": report.coerced_arguments,
                **result.to_dict(),
            }
            tool_msg = ChatMessage(
                role=Role.TOOL,
                content=json.dumps(tool_content, sort_keys=True),
                tool_call_id=envelope.call_id,
            )
            state.messages.append(tool_msg)
            self._audit(
                state,
                ctx.turn,
                StepKind.TOOL_RESULT,
                {"message": tool_msg.to_dict(), "row_count": result.row_count},
            )
            trace.append(
                ToolTraceEntry(
                    function=fn.name,
                    arguments=dict(report.coerced_arguments),
                    row_count=result.row_count,
                )
            )
