"""Baseline retrieval pipeline: intent, example match or generation, draft
validation against the schema catalog, execution, and answer generation.

Unlike the function-calling path, the SQL executed here is not whitelisted
against registered templates; that asymmetry is the point of the comparison
and stays observable in the audit records' ``origin`` field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Sequence

from .. import plantdb, schemaguard
from ..audit import AuditError, AuditStore, PathKind, StepKind
from ..backends import Backend, ChatMessage, ResponseKind, Role, ToolDescriptor
from ..backends.base import BackendError
from ..orchestrator import ConversationState, TurnStatus
from ..plantdb import PlantDb, QueryResultSet
from ..schemaguard import (
    Dtype,
    ParamSchema,
    RetryExhausted,
    RetryPolicy,
    ValidationReport,
    Violation,
    ViolationCode,
)
from .identifiers import SqlParseError, apply_renames, levenshtein, scan_sql
from .retrieval import ExampleEntry, normalize_tokens, retrieve_examples

NL2SQL_PROMPT = (
    "You are the plant-maintenance data assistant. Questions are answered by drafting a "
    "single SQL SELECT statement against the maintenance schema, validating it, and "
    "summarizing the results."
)

FAILURE_ANSWER = "I could not retrieve the data for this question from the maintenance database."

DEFAULT_SIMILARITY_THRESHOLD = 0.8


class EntityKind(Enum):
    TABLE = "TABLE"
    FIELD = "FIELD"
    CONDITION_VALUE = "CONDITION_VALUE"
    PERSON = "PERSON"
    EQUIPMENT = "EQUIPMENT"
    DATE = "DATE"


@dataclass(frozen=True)
class IntentRecord:
    intent_summary: str
    entities: tuple[tuple[EntityKind, str], ...]
    confidence: float

    def first(self, kind: EntityKind) -> str | None:
        for entity_kind, text in self.entities:
            if entity_kind is kind:
                return text
        return None

    def tokens(self) -> frozenset[str]:
        return normalize_tokens(self.intent_summary)

    def to_dict(self) -> dict[str, Any]:
        return {
            "intent_summary": self.intent_summary,
            "entities": [[kind.value, text] for kind, text in self.entities],
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class SchemaCatalog:
    """Tables and fields derived from the live schema, plus legacy field notes."""

    tables: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    field_docs: dict[str, str]

    @classmethod
    def from_db(cls, db: PlantDb) -> "SchemaCatalog":
        tables = []
        for table in plantdb.TABLES:
            result = plantdb.execute_parameterized(
                db, f"SELECT name, type FROM pragma_table_info('{table}')", []
            )
            tables.append((table, tuple((str(r[0]), str(r[1])) for r in result.rows)))
        # Legacy documentation quirk kept on purpose: the originator field is
        # not named what decades of plant paperwork call it.
        docs = {"work_request.entered_by": "documented in legacy manuals as 'originator'"}
        return cls(tables=tuple(tables), field_docs=docs)

    def table_names(self) -> list[str]:
        return [name for name, _ in self.tables]

    def fields_of(self, table: str) -> list[str]:
        for name, fields in self.tables:
            if name == table:
                return [f for f, _ in fields]
        return []

    def render(self) -> str:
        lines = []
        for name, fields in self.tables:
            cols = ", ".join(f"{f} {t}" for f, t in fields)
            lines.append(f"{name}({cols})")
        for key, note in self.field_docs.items():
            lines.append(f"note: {key} {note}")
        return "\n".join(lines)


class DraftOrigin(Enum):
    EXAMPLE_SUBSTITUTION = "EXAMPLE_SUBSTITUTION"
    GENERATED = "GENERATED"


class FixKind(Enum):
    TABLE_RENAME = "TABLE_RENAME"
    FIELD_RENAME = "FIELD_RENAME"


@dataclass(frozen=True)
class ValidationFix:
    kind: FixKind
    from_name: str
    to_name: str
    edit_distance: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "from_name": self.from_name,
            "to_name": self.to_name,
            "edit_distance": self.edit_distance,
        }


@dataclass(frozen=True)
class SqlDraft:
    sql: str
    origin: DraftOrigin
    explanation: str
    fixes: tuple[ValidationFix, ...] = ()
    source_example_id: str | None = None

    def __post_init__(self) -> None:
        if self.origin is DraftOrigin.EXAMPLE_SUBSTITUTION and not self.source_example_id:
            raise ValueError("example substitution drafts must record their source example")

    def to_dict(self) -> dict[str, Any]:
        return {
            "sql": self.sql,
            "origin": self.origin.value,
            "explanation": self.explanation,
            "fixes": [f.to_dict() for f in self.fixes],
            "source_example_id": self.source_example_id,
        }


class DraftRejected(Exception):
    def __init__(self, offenders: list[str]):
        self.offenders = offenders
        super().__init__(f"unresolvable identifiers: {', '.join(offenders)}")


class PipelineFailure(Exception):
    def __init__(self, step: str, detail: str):
        self.step = step
        self.detail = detail
        super().__init__(f"pipeline failed at {step}: {detail}")


@dataclass(frozen=True)
class PipelineOutcome:
    answer: str
    status: TurnStatus
    intent: IntentRecord | None = None
    draft: SqlDraft | None = None
    result: QueryResultSet | None = None
    failed_step: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "status": self.status.value,
            "intent": self.intent.to_dict() if self.intent else None,
            "draft": self.draft.to_dict() if self.draft else None,
            "result": self.result.to_dict() if self.result else None,
            "failed_step": self.failed_step,
        }


INTENT_TOOL = ToolDescriptor(
    name="record_intent",
    description="Record the question's intent summary and key entities.",
    parameters=(
        ParamSchema("intent_summary", Dtype.STRING, description="short generic phrasing"),
        ParamSchema("confidence", Dtype.NUMBER, description="0..1 confidence"),
        ParamSchema("table_name", Dtype.STRING, required=False),
        ParamSchema("field_name", Dtype.STRING, required=False),
        ParamSchema("person", Dtype.STRING, required=False),
        ParamSchema("equipment", Dtype.STRING, required=False),
        ParamSchema("condition_value", Dtype.STRING, required=False),
        ParamSchema("date_value", Dtype.DATE, required=False),
    ),
)

DRAFT_TOOL = ToolDescriptor(
    name="draft_sql",
    description="Record one SQL SELECT statement answering the question, with an explanation.",
    parameters=(
        ParamSchema("sql", Dtype.STRING, description="a single SELECT statement"),
        ParamSchema("explanation", Dtype.STRING, description="how the query was built"),
    ),
)

_ENTITY_PARAM_KINDS = (
    ("table_name", EntityKind.TABLE),
    ("field_name", EntityKind.FIELD),
    ("person", EntityKind.PERSON),
    ("equipment", EntityKind.EQUIPMENT),
    ("condition_value", EntityKind.CONDITION_VALUE),
    ("date_value", EntityKind.DATE),
)

_KIND_TO_PARAM = {kind: param for param, kind in _ENTITY_PARAM_KINDS}


def _tool_call_validator(tool: ToolDescriptor):
    def validate_fn(response) -> ValidationReport:
        if response.kind is not ResponseKind.TOOL_CALL:
            return ValidationReport(
                ok=False,
                violations=(
                    Violation(
                        tool.name,
                        ViolationCode.UNKNOWN_TOOL,
                        f"expected a {tool.name} tool call, got free text",
                    ),
                ),
            )
        return schemaguard.validate(response.tool_call, tool.parameters, {tool.name})

    return validate_fn


def _structured_call(
    backend: Backend,
    system_prompt: str,
    user_text: str,
    tool: ToolDescriptor,
    policy: RetryPolicy,
    on_violation=None,
) -> tuple[dict[str, Any], int]:
    """Ask the backend for one validated tool-call record; returns (coerced args, attempts)."""
    conversation = [
        ChatMessage(role=Role.SYSTEM, content=system_prompt),
        ChatMessage(role=Role.USER, content=user_text),
    ]

    def produce():
        return backend.complete(conversation, [tool])

    base_validator = _tool_call_validator(tool)

    def validate_fn(response) -> ValidationReport:
        report = base_validator(response)
        if not report.ok and on_violation is not None:
            on_violation(report)
        return report

    def feedback_sink(text: str) -> None:
        conversation.append(ChatMessage(role=Role.SYSTEM, content=text))

    outcome = schemaguard.run_with_retries(
        produce, validate_fn, policy, feedback_sink, transient=(BackendError,)
    )
    assert outcome.report.coerced_arguments is not None
    return outcome.report.coerced_arguments, outcome.attempts


def intent_from_arguments(arguments: dict[str, Any]) -> IntentRecord:
    entities = tuple(
        (kind, str(arguments[param]))
        for param, kind in _ENTITY_PARAM_KINDS
        if arguments.get(param) not in (None, "")
    )
    confidence = min(1.0, max(0.0, float(arguments.get("confidence", 0.0))))
    return IntentRecord(
        intent_summary=str(arguments.get("intent_summary", "")),
        entities=entities,
        confidence=confidence,
    )


def extract_intent(
    query: str,
    backend: Backend,
    policy: RetryPolicy | None = None,
    on_violation=None,
) -> tuple[IntentRecord, int]:
    """Step two: pull intent and entities out of the question."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    policy = policy or RetryPolicy()
    arguments, attempts = _structured_call(
        backend,
        "Extract the intent of this maintenance-data question. Summarize it generically "
        "(no literal values in the summary) and record entities in the typed fields.",
        query,
        INTENT_TOOL,
        policy,
        on_violation,
    )
    return intent_from_arguments(arguments), attempts


def _escape_literal(value: str) -> str:
    return value.replace("'", "''")


def decide_and_draft(
    intent: IntentRecord,
    ranked: Sequence[tuple[ExampleEntry, float]],
    threshold: float,
    catalog: SchemaCatalog,
    backend: Backend,
    policy: RetryPolicy | None = None,
    query: str = "",
    on_violation=None,
) -> tuple[SqlDraft, int]:
    """Step three and four: reuse a close example or generate fresh SQL."""
    policy = policy or RetryPolicy()
    if ranked and ranked[0][1] >= threshold:
        entry, score = ranked[0]
        values: dict[str, str] = {}
        fillable = True
        for slot_name, slot_kind in entry.slots:
            value = intent.first(EntityKind(slot_kind))
            if value is None:
                fillable = False
                break
            values[slot_name] = _escape_literal(value)
        if fillable:
            sql = entry.sql_template.format_map(values)
            return (
                SqlDraft(
                    sql=sql,
                    origin=DraftOrigin.EXAMPLE_SUBSTITUTION,
                    explanation=(
                        f"matched example {entry.example_id} with similarity {score:.2f}; "
                        "replaced its parameters with values from the intent"
                    ),
                    source_example_id=entry.example_id,
                ),
                0,
            )

    example_block = "\n".join(
        f"- {entry.nl_text}: {entry.sql_template}" for entry, _ in ranked[:3]
    )
    prompt = (
        "Draft one SQL SELECT statement answering the question, using this schema:\n"
        f"{catalog.render()}\n"
        "Reference examples:\n"
        f"{example_block}\n"
        "Record the statement and an explanation of how it was built."
    )
    arguments, attempts = _structured_call(
        backend, prompt, query or intent.intent_summary, DRAFT_TOOL, policy, on_violation
    )
    return (
        SqlDraft(
            sql=str(arguments["sql"]),
            origin=DraftOrigin.GENERATED,
            explanation=str(arguments["explanation"]),
        ),
        attempts,
    )


def _unique_fix(name: str, candidates: Sequence[str]) -> tuple[str, int] | None:
    scored = sorted((levenshtein(name, c), c) for c in candidates)
    if not scored or scored[0][0] > 2:
        return None
    best_distance = scored[0][0]
    best = [c for d, c in scored if d == best_distance]
    if len(best) != 1:
        return None
    return best[0], best_distance


def validate_draft(draft: SqlDraft, catalog: SchemaCatalog) -> SqlDraft:
    """Step five: cross-check identifiers against the catalog, fixing near misses.

    Every table and field must exist in the catalog or be renamable to the
    unique catalog name within edit distance 2; anything else rejects the
    draft.
    """
    try:
        scan = scan_sql(draft.sql)
    except SqlParseError as exc:
        raise DraftRejected([f"unparseable: {exc}"]) from exc

    fixes: list[ValidationFix] = []
    renames: list[tuple[tuple[int, int], str]] = []
    offenders: list[str] = []
    table_names = catalog.table_names()

    resolved_tables: list[str] = []
    for table in scan.tables:
        if table in table_names:
            resolved_tables.append(table)
            continue
        fix = _unique_fix(table, table_names)
        if fix is None:
            offenders.append(f"table {table}")
            continue
        to_name, distance = fix
        resolved_tables.append(to_name)
        fixes.append(ValidationFix(FixKind.TABLE_RENAME, table, to_name, distance))
        renames.extend((span, to_name) for span in scan.table_spans[table])

    allowed_fields = sorted({f for t in resolved_tables for f in catalog.fields_of(t)})
    for field_name in scan.fields:
        if field_name in allowed_fields:
            continue
        fix = _unique_fix(field_name, allowed_fields)
        if fix is None:
            offenders.append(f"field {field_name}")
            continue
        to_name, distance = fix
        fixes.append(ValidationFix(FixKind.FIELD_RENAME, field_name, to_name, distance))
        renames.extend((span, to_name) for span in scan.field_spans[field_name])

    if offenders:
        raise DraftRejected(offenders)
    if not renames:
        return replace(draft, fixes=tuple(fixes))
    return replace(draft, sql=apply_renames(draft.sql, renames), fixes=tuple(fixes))


def generate_answer(query: str, result: QueryResultSet, backend: Backend) -> str:
    """Step seven: produce the user-facing answer from the JSON-converted rows."""
    payload = {"question": query, **result.to_dict()}
    response = backend.complete(
        [
            ChatMessage(
                role=Role.SYSTEM,
                content=(
                    "Write the final answer to the user's question from the attached query "
                    "results. Use only the provided rows; if there are none, say clearly "
                    "that no data was found."
                ),
            ),
            ChatMessage(role=Role.USER, content=json.dumps(payload, sort_keys=True)),
        ],
        [],
    )
    if response.kind is not ResponseKind.TEXT:
        raise PipelineFailure("generate_answer", "backend returned a tool call instead of text")
    assert response.text is not None
    return response.text


class Nl2SqlPipeline:
    """Seven-step baseline wired to the shared database and audit store."""

    def __init__(
        self,
        db: PlantDb,
        backend: Backend,
        catalog: SchemaCatalog,
        examples: list[ExampleEntry],
        audit_store: AuditStore,
        threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
        max_attempts: int = 3,
        retrieval_k: int = 3,
    ):
        self.db = db
        self.backend = backend
        self.catalog = catalog
        self.examples = examples
        self.audit_store = audit_store
        self.threshold = threshold
        self.policy = RetryPolicy(max_attempts=max_attempts)
        self.retrieval_k = retrieval_k
        self.audit_failures = 0

    def _audit(
        self, state: ConversationState, turn: int, step: StepKind, payload: dict[str, Any]
    ) -> None:
        try:
            self.audit_store.append(
                session_id=state.session_id,
                turn=turn,
                step_kind=step,
                payload=payload,
                path=PathKind.NL2SQL,
            )
        except AuditError:
            self.audit_failures += 1

    def run(self, state: ConversationState, query: str) -> PipelineOutcome:
        """Run the pipeline for one question; failures become outcomes, not crashes."""
        state.turn_counter += 1
        turn = state.turn_counter
        user_msg = ChatMessage(role=Role.USER, content=query)
        payload: dict[str, Any] = {"raw_text": query, "message": user_msg.to_dict()}
        if turn == 1:
            payload["system_message"] = state.messages[0].to_dict()
        self._audit(state, turn, StepKind.USER_QUERY, payload)
        state.messages.append(user_msg)

        try:
            outcome = self._run_steps(state, turn, query)
        except PipelineFailure as failure:
            self._audit(
                state,
                turn,
                StepKind.FAULT,
                {"step": failure.step, "detail": failure.detail},
            )
            outcome = PipelineOutcome(
                answer=FAILURE_ANSWER, status=TurnStatus.FAILED, failed_step=failure.step
            )
        answer_msg = ChatMessage(role=Role.ASSISTANT, content=outcome.answer)
        state.messages.append(answer_msg)
        self._audit(
            state,
            turn,
            StepKind.ANSWER,
            {"message": answer_msg.to_dict(), "status": outcome.status.value},
        )
        return outcome

    def _run_steps(self, state: ConversationState, turn: int, query: str) -> PipelineOutcome:
        def audit_violation(stage: str):
            def on_violation(report: ValidationReport) -> None:
                self._audit(
                    state,
                    turn,
                    StepKind.VALIDATION_FAIL,
                    {"stage": stage, "violations": [v.to_dict() for v in report.violations]},
                )

            return on_violation

        try:
            intent, attempts = extract_intent(
                query, self.backend, self.policy, audit_violation("extract_intent")
            )
        except (RetryExhausted, BackendError) as exc:
            raise PipelineFailure("extract_intent", str(exc)) from exc
        self._audit(
            state,
            turn,
            StepKind.TOOL_CALL,
            {"step": "extract_intent", "intent": intent.to_dict(), "attempts": attempts},
        )

        if not intent.entities:
            # Nothing to retrieve; answer conversationally without touching the database.
            response = self.backend.complete(
                [
                    ChatMessage(role=Role.SYSTEM, content=NL2SQL_PROMPT),
                    ChatMessage(role=Role.USER, content=query),
                ],
                [],
            )
            if response.kind is not ResponseKind.TEXT or not response.text:
                raise PipelineFailure("intent_short_circuit", "backend gave no text answer")
            self._audit(
                state, turn, StepKind.ROUTE, {"step": "intent_short_circuit", "decision": "direct"}
            )
            return PipelineOutcome(answer=response.text, status=TurnStatus.OK, intent=intent)

        ranked = retrieve_examples(intent.tokens(), self.examples, self.retrieval_k)
        self._audit(
            state,
            turn,
            StepKind.ROUTE,
            {
                "step": "retrieve_examples",
                "threshold": self.threshold,
                "scores": [[entry.example_id, round(score, 4)] for entry, score in ranked],
            },
        )

        try:
            draft, attempts = decide_and_draft(
                intent,
                ranked,
                self.threshold,
                self.catalog,
                self.backend,
                self.policy,
                query=query,
                on_violation=audit_violation("draft_sql"),
            )
        except (RetryExhausted, BackendError) as exc:
            raise PipelineFailure("decide_and_draft", str(exc)) from exc
        self._audit(
            state,
            turn,
            StepKind.TOOL_CALL,
            {"step": "draft_sql", "draft": draft.to_dict(), "attempts": attempts},
        )

        try:
            validated = validate_draft(draft, self.catalog)
        except DraftRejected as exc:
            raise PipelineFailure("validate_draft", str(exc)) from exc

        try:
            result = plantdb.execute_freeform(self.db, validated.sql)
        except plantdb.PlantDbError as exc:
            raise PipelineFailure("execute_sql", str(exc)) from exc
        self._audit(
            state,
            turn,
            StepKind.SQL_EXECUTED,
            {
                "sql": validated.sql,
                "origin": validated.origin.value,
                "fixes": [f.to_dict() for f in validated.fixes],
                "source_example_id": validated.source_example_id,
                "row_count": result.row_count,
            },
        )

        try:
            answer = generate_answer(query, result, self.backend)
        except BackendError as exc:
            raise PipelineFailure("generate_answer", str(exc)) from exc
        status = TurnStatus.NO_DATA if result.row_count == 0 else TurnStatus.OK
        return PipelineOutcome(
            answer=answer, status=status, intent=intent, draft=validated, result=result
        )
