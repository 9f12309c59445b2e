"""Validation of structured model outputs against declared parameter schemas.

All structured payloads a model emits (tool-call envelopes, intent records,
draft records) are validated here before anything acts on them. Failures are
data, never exceptions; the bounded retry loop feeds violations back to the
model as conversation messages.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Any, Callable, Iterable, Sequence


class Dtype(Enum):
    STRING = "string"
    INTEGER = "integer"
    NUMBER = "number"
    BOOLEAN = "boolean"
    DATE = "date"
    ENUM = "enum"


@dataclass(frozen=True)
class ParamSchema:
    """One declared parameter of a callable surface."""

    name: str
    dtype: Dtype
    required: bool = True
    enum_values: tuple[str, ...] | None = None
    description: str = ""

    def __post_init__(self) -> None:
        if (self.dtype is Dtype.ENUM) != bool(self.enum_values):
            raise ValueError(f"param {self.name}: enum_values required iff dtype is ENUM")

    def to_json_schema(self) -> dict[str, Any]:
        """JSON-schema fragment used in the chat-completions wire format."""
        out: dict[str, Any] = {}
        if self.dtype is Dtype.STRING:
            out["type"] = "string"
        elif self.dtype is Dtype.INTEGER:
            out["type"] = "integer"
        elif self.dtype is Dtype.NUMBER:
            out["type"] = "number"
        elif self.dtype is Dtype.BOOLEAN:
            out["type"] = "boolean"
        elif self.dtype is Dtype.DATE:
            out["type"] = "string"
            out["format"] = "date"
        elif self.dtype is Dtype.ENUM:
            out["type"] = "string"
            out["enum"] = list(self.enum_values or ())
        if self.description:
            out["description"] = self.description
        return out

    @classmethod
    def from_json_schema(cls, name: str, fragment: dict[str, Any], required: bool) -> "ParamSchema":
        if fragment.get("enum"):
            dtype = Dtype.ENUM
            enum_values: tuple[str, ...] | None = tuple(fragment["enum"])
        elif fragment.get("format") == "date":
            dtype, enum_values = Dtype.DATE, None
        else:
            dtype = {
                "string": Dtype.STRING,
                "integer": Dtype.INTEGER,
                "number": Dtype.NUMBER,
                "boolean": Dtype.BOOLEAN,
            }[fragment.get("type", "string")]
            enum_values = None
        return cls(
            name=name,
            dtype=dtype,
            required=required,
            enum_values=enum_values,
            description=fragment.get("description", ""),
        )


@dataclass(frozen=True)
class ToolCallEnvelope:
    """Structured output of a model turn that selects a callable."""

    tool_name: str
    arguments: dict[str, Any]
    call_id: str

    def to_dict(self) -> dict[str, Any]:
        return {"tool_name": self.tool_name, "arguments": dict(self.arguments), "call_id": self.call_id}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "ToolCallEnvelope":
        return cls(
            tool_name=payload["tool_name"],
            arguments=dict(payload.get("arguments", {})),
            call_id=payload.get("call_id", ""),
        )


class ViolationCode(Enum):
    MISSING = "MISSING"
    UNKNOWN_PARAM = "UNKNOWN_PARAM"
    WRONG_TYPE = "WRONG_TYPE"
    BAD_DATE = "BAD_DATE"
    NOT_IN_ENUM = "NOT_IN_ENUM"
    UNKNOWN_TOOL = "UNKNOWN_TOOL"


@dataclass(frozen=True)
class Violation:
    param: str
    code: ViolationCode
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"param": self.param, "code": self.code.value, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    """Full verdict on one envelope. ``coerced_arguments`` is present iff ok."""

    ok: bool
    violations: tuple[Violation, ...] = ()
    coerced_arguments: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.ok != (not self.violations):
            raise ValueError("ok must hold exactly when violations is empty")
        if self.ok and self.coerced_arguments is None:
            raise ValueError("coerced_arguments required when ok")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    feedback_template: str = (
        "The previous response was invalid. Problems: {violations}. "
        "Respond again, following the declared parameter schema exactly."
    )

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


_INT_RE = re.compile(r"^[+-]?\d+$")
_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def _coerce(value: Any, schema: ParamSchema) -> tuple[Any, Violation | None]:
    name = schema.name
    if schema.dtype is Dtype.STRING:
        if isinstance(value, str):
            return value.strip(), None
        return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be a string")
    if schema.dtype is Dtype.INTEGER:
        if isinstance(value, bool):
            return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be an integer")
        if isinstance(value, int):
            return value, None
        if isinstance(value, float) and value.is_integer():
            return int(value), None
        if isinstance(value, str) and _INT_RE.match(value.strip()):
            return int(value.strip()), None
        return None, Violation(
            name, ViolationCode.WRONG_TYPE, f"{name} must be an integer (got {value!r})"
        )
    if schema.dtype is Dtype.NUMBER:
        if isinstance(value, bool):
            return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be a number")
        if isinstance(value, (int, float)):
            return float(value), None
        if isinstance(value, str) and _NUM_RE.match(value.strip()):
            return float(value.strip()), None
        return None, Violation(
            name, ViolationCode.WRONG_TYPE, f"{name} must be a number (got {value!r})"
        )
    if schema.dtype is Dtype.BOOLEAN:
        if isinstance(value, bool):
            return value, None
        return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be true or false")
    if schema.dtype is Dtype.DATE:
        if not isinstance(value, str):
            return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be a date string")
        text = value.strip()
        if not _DATE_RE.match(text):
            return None, Violation(
                name, ViolationCode.BAD_DATE, f"{name} must be an ISO-8601 date, format YYYY-MM-DD"
            )
        try:
            date.fromisoformat(text)
        except ValueError:
            return None, Violation(
                name, ViolationCode.BAD_DATE, f"{name} is not a valid calendar date (YYYY-MM-DD)"
            )
        return text, None
    if schema.dtype is Dtype.ENUM:
        if not isinstance(value, str):
            return None, Violation(name, ViolationCode.WRONG_TYPE, f"{name} must be a string")
        text = value.strip()
        if text not in (schema.enum_values or ()):
            allowed = ", ".join(schema.enum_values or ())
            return None, Violation(
                name, ViolationCode.NOT_IN_ENUM, f"{name} must be one of: {allowed}"
            )
        return text, None
    raise AssertionError(f"unhandled dtype {schema.dtype}")


def validate(
    envelope: ToolCallEnvelope,
    schemas: Sequence[ParamSchema],
    known_tools: Iterable[str],
) -> ValidationReport:
    """Check an envelope against the declared schemas; pure and total.

    Collects the full violation list rather than stopping at the first failure.
    Coercions are applied only when lossless: numeric strings for INTEGER and
    NUMBER when exact, whitespace trimming for STRING, strict ISO-8601 parse
    for DATE.
    """
    known = set(known_tools)
    if envelope.tool_name not in known:
        return ValidationReport(
            ok=False,
            violations=(
                Violation(
                    envelope.tool_name,
                    ViolationCode.UNKNOWN_TOOL,
                    f"unknown tool {envelope.tool_name!r}; available: {', '.join(sorted(known))}",
                ),
            ),
        )

    by_name = {s.name: s for s in schemas}
    violations: list[Violation] = []
    coerced: dict[str, Any] = {}

    for schema in schemas:
        if schema.name not in envelope.arguments or envelope.arguments[schema.name] is None:
            if schema.required:
                violations.append(
                    Violation(schema.name, ViolationCode.MISSING, f"{schema.name} is required")
                )
            continue
        value, violation = _coerce(envelope.arguments[schema.name], schema)
        if violation is not None:
            violations.append(violation)
        else:
            coerced[schema.name] = value

    for name in envelope.arguments:
        if name not in by_name:
            violations.append(
                Violation(name, ViolationCode.UNKNOWN_PARAM, f"{name} is not a declared parameter")
            )

    if violations:
        return ValidationReport(ok=False, violations=tuple(violations))
    return ValidationReport(ok=True, coerced_arguments=coerced)


def format_violations(report: ValidationReport) -> str:
    return "; ".join(f"{v.param}: {v.code.value} ({v.message})" for v in report.violations)


def render_feedback(report: ValidationReport, policy: RetryPolicy) -> str:
    return policy.feedback_template.format(violations=format_violations(report))


@dataclass
class RetryOutcome:
    """Successful retry-loop result."""

    value: Any
    report: ValidationReport
    attempts: int


class RetryExhausted(Exception):
    """All attempts failed; carries every collected report."""

    def __init__(self, reports: list[ValidationReport], transient_errors: list[str]):
        self.reports = reports
        self.transient_errors = transient_errors
        last = format_violations(reports[-1]) if reports else "; ".join(transient_errors)
        super().__init__(f"validation exhausted after retries: {last}")

    @property
    def last_report(self) -> ValidationReport | None:
        return self.reports[-1] if self.reports else None


def run_with_retries(
    produce: Callable[[], Any],
    validate_fn: Callable[[Any], ValidationReport],
    policy: RetryPolicy,
    feedback_sink: Callable[[str], None],
    transient: tuple[type[BaseException], ...] = (),
) -> RetryOutcome:
    """Produce-and-validate loop with bounded attempts and violation feedback.

    On each failed attempt except the last, the formatted violations are handed
    to ``feedback_sink`` so the next production sees them. Producer exceptions
    listed in ``transient`` count as attempts. Raises :class:`RetryExhausted`
    after ``policy.max_attempts`` failures.
    """
    reports: list[ValidationReport] = []
    transient_errors: list[str] = []
    for attempt in range(1, policy.max_attempts + 1):
        try:
            value = produce()
        except transient as exc:
            transient_errors.append(str(exc))
            continue
        report = validate_fn(value)
        reports.append(report)
        if report.ok:
            return RetryOutcome(value=value, report=report, attempts=attempt)
        if attempt < policy.max_attempts:
            feedback_sink(render_feedback(report, policy))
    raise RetryExhausted(reports, transient_errors)
