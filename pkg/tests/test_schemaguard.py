from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plantquery.schemaguard import (
    Dtype,
    ParamSchema,
    RetryExhausted,
    RetryPolicy,
    RetryOutcome,
    ToolCallEnvelope,
    ValidationReport,
    ViolationCode,
    render_feedback,
    run_with_retries,
    validate,
)

from envelope_oracle import envelope_conforms

WO_SCHEMAS = (
    ParamSchema("equip_id", Dtype.STRING, description="equipment id"),
)

MIXED_SCHEMAS = (
    ParamSchema("author", Dtype.STRING),
    ParamSchema("qty", Dtype.INTEGER, required=False),
    ParamSchema("ratio", Dtype.NUMBER, required=False),
    ParamSchema("urgent", Dtype.BOOLEAN, required=False),
    ParamSchema("date_from", Dtype.DATE, required=False),
    ParamSchema("status", Dtype.ENUM, required=False, enum_values=("OPEN", "CLOSED", "HOLD")),
)

KNOWN = {"count_work_orders_by_equipment", "list_work_requests_by_author"}


def envelope(tool="count_work_orders_by_equipment", **arguments):
    return ToolCallEnvelope(tool_name=tool, arguments=arguments, call_id="c1")


def test_conforming_call_passes():
    report = validate(envelope(equip_id="056-SG2"), WO_SCHEMAS, KNOWN)
    assert report.ok
    assert report.coerced_arguments == {"equip_id": "056-SG2"}


def test_number_is_not_coerced_to_string():
    report = validate(envelope(equip_id=42), WO_SCHEMAS, KNOWN)
    assert not report.ok
    assert report.violations[0].code is ViolationCode.WRONG_TYPE


@pytest.mark.parametrize(
    "value,expected_ok,expected_coerced",
    [
        ("7", True, 7),
        ("  7 ", True, 7),
        (7, True, 7),
        (7.0, True, 7),
        ("7.5", False, None),
        (7.5, False, None),
        (True, False, None),
        ("seven", False, None),
    ],
)
def test_integer_coercion_table(value, expected_ok, expected_coerced):
    schemas = (ParamSchema("qty", Dtype.INTEGER),)
    report = validate(envelope("list_work_requests_by_author", qty=value), schemas,
                      KNOWN)
    assert report.ok == expected_ok
    if expected_ok:
        assert report.coerced_arguments == {"qty": expected_coerced}


@pytest.mark.parametrize(
    "value,ok",
    [("2024-03-01", True), (" 2024-03-01 ", True), ("2024-13-01", False),
     ("03/01/2024", False), ("2024-3-1", False), (20240301, False)],
)
def test_date_validation(value, ok):
    schemas = (ParamSchema("date_from", Dtype.DATE),)
    report = validate(envelope(date_from=value), schemas, KNOWN)
    assert report.ok == ok
    if not ok and isinstance(value, str):
        assert report.violations[0].code is ViolationCode.BAD_DATE
        assert "YYYY-MM-DD" in report.violations[0].message


def test_enum_and_unknown_param_and_missing():
    schemas = MIXED_SCHEMAS
    report = validate(
        envelope("list_work_requests_by_author", status="BROKEN", extra=1), schemas, KNOWN
    )
    assert not report.ok
    codes = {v.code for v in report.violations}
    assert codes == {
        ViolationCode.NOT_IN_ENUM,
        ViolationCode.UNKNOWN_PARAM,
        ViolationCode.MISSING,
    }


def test_unknown_tool():
    report = validate(envelope("no_such_fn", equip_id="x"), WO_SCHEMAS, KNOWN)
    assert not report.ok
    assert report.violations[0].code is ViolationCode.UNKNOWN_TOOL


def test_full_violation_list_not_first_failure():
    schemas = (
        ParamSchema("a", Dtype.INTEGER),
        ParamSchema("b", Dtype.DATE),
    )
    report = validate(envelope(a="x", b="bad", c=1), schemas, KNOWN)
    assert len(report.violations) == 3


def test_coercion_idempotence_on_examples():
    schemas = MIXED_SCHEMAS
    report = validate(
        envelope(
            "list_work_requests_by_author",
            author="  John Smith ",
            qty="7",
            ratio="2.5",
            urgent=True,
            date_from=" 2024-01-02",
            status="OPEN ",
        ),
        schemas,
        KNOWN,
    )
    assert report.ok
    second = validate(
        envelope("list_work_requests_by_author", **report.coerced_arguments), schemas, KNOWN
    )
    assert second.ok
    assert second.coerced_arguments == report.coerced_arguments


# -- fuzz against the independent oracle ----------------------------------------

_FUZZ_TOOLS = {
    "count_work_orders_by_equipment": WO_SCHEMAS,
    "list_work_requests_by_author": MIXED_SCHEMAS,
}

_CONFORMING_VALUES = {
    Dtype.STRING: ["056-SG2", "John Smith", "  padded  "],
    Dtype.INTEGER: [7, "7", 7.0, -3, "  12 "],
    Dtype.NUMBER: [2.5, "2.5", 7, "1e3"],
    Dtype.BOOLEAN: [True, False],
    Dtype.DATE: ["2024-03-01", " 2025-12-31 "],
    Dtype.ENUM: ["OPEN", "CLOSED", "HOLD"],
}

_BROKEN_VALUES = {
    Dtype.STRING: [42, True, 1.5],
    Dtype.INTEGER: ["7.5", "x", True, 7.25],
    Dtype.NUMBER: ["abc", True],
    Dtype.BOOLEAN: ["true", 1, 0],
    Dtype.DATE: ["2024-13-01", "01/02/2024", "soon", 20240101],
    Dtype.ENUM: ["open", "BROKEN", 5],
}


def _mutate(rng: random.Random, arguments: dict, schemas) -> dict:
    arguments = dict(arguments)
    choice = rng.randrange(6)
    schema = rng.choice(list(schemas))
    if choice == 0 and schema.name in arguments:
        del arguments[schema.name]
    elif choice == 1:
        arguments[f"extra_{rng.randrange(3)}"] = rng.choice(["x", 1, None])
    elif choice == 2:
        arguments[schema.name] = rng.choice(_BROKEN_VALUES[schema.dtype])
    elif choice == 3:
        arguments[schema.name] = rng.choice(_CONFORMING_VALUES[schema.dtype])
    elif choice == 4:
        arguments[schema.name] = None
    # choice == 5: no mutation this round
    return arguments


def test_fuzz_validate_matches_oracle_and_never_crashes():
    rng = random.Random(20240611)
    accept = reject = 0
    for _ in range(1000):
        tool = rng.choice(sorted(_FUZZ_TOOLS))
        schemas = _FUZZ_TOOLS[tool]
        arguments = {
            s.name: rng.choice(_CONFORMING_VALUES[s.dtype])
            for s in schemas
            if s.required or rng.random() < 0.5
        }
        for _ in range(rng.randrange(4)):
            arguments = _mutate(rng, arguments, schemas)
        if rng.random() < 0.05:
            tool = "unregistered_tool"
        candidate = ToolCallEnvelope(tool_name=tool, arguments=arguments, call_id="f")
        known = set(_FUZZ_TOOLS)
        schemas_for_tool = _FUZZ_TOOLS.get(tool, ())
        report = validate(candidate, schemas_for_tool, known)
        expected = envelope_conforms(candidate, schemas_for_tool, known)
        assert report.ok == expected, (tool, arguments, [v.to_dict() for v in report.violations])
        accept += report.ok
        reject += not report.ok
    assert accept > 100 and reject > 100


@settings(max_examples=200, deadline=None)
@given(
    value=st.one_of(
        st.none(), st.booleans(), st.integers(), st.floats(allow_nan=False), st.text()
    ),
    dtype=st.sampled_from(list(Dtype)),
)
def test_validate_total_on_arbitrary_values(value, dtype):
    schema = ParamSchema(
        "p", dtype, enum_values=("A", "B") if dtype is Dtype.ENUM else None
    )
    report = validate(
        ToolCallEnvelope("count_work_orders_by_equipment", {"p": value}, "h"),
        (schema,),
        KNOWN,
    )
    assert isinstance(report, ValidationReport)
    if report.ok:
        again = validate(
            ToolCallEnvelope(
                "count_work_orders_by_equipment", dict(report.coerced_arguments), "h"
            ),
            (schema,),
            KNOWN,
        )
        assert again.ok and again.coerced_arguments == report.coerced_arguments


# -- retry loop -----------------------------------------------------------------


class _ScriptedProducer:
    def __init__(self, values):
        self.values = list(values)
        self.calls = 0

    def __call__(self):
        self.calls += 1
        value = self.values.pop(0)
        if isinstance(value, Exception):
            raise value
        return value


def _report_for(value) -> ValidationReport:
    if value == "good":
        return ValidationReport(ok=True, coerced_arguments={"value": value})
    from plantquery.schemaguard import Violation

    return ValidationReport(
        ok=False,
        violations=(Violation("value", ViolationCode.WRONG_TYPE, "value must be 'good'"),),
    )


def test_retry_success_first_attempt():
    producer = _ScriptedProducer(["good"])
    feedback: list[str] = []
    outcome = run_with_retries(producer, _report_for, RetryPolicy(max_attempts=3), feedback.append)
    assert isinstance(outcome, RetryOutcome)
    assert producer.calls == 1
    assert outcome.attempts == 1
    assert feedback == []


def test_retry_invalid_invalid_valid():
    producer = _ScriptedProducer(["bad", "bad", "good"])
    feedback: list[str] = []
    outcome = run_with_retries(producer, _report_for, RetryPolicy(max_attempts=3), feedback.append)
    assert producer.calls == 3
    assert outcome.attempts == 3
    assert len(feedback) == 2
    assert all("WRONG_TYPE" in f for f in feedback)


def test_retry_exhaustion_after_exact_cap():
    producer = _ScriptedProducer(["bad"] * 10)
    feedback: list[str] = []
    with pytest.raises(RetryExhausted) as err:
        run_with_retries(producer, _report_for, RetryPolicy(max_attempts=3), feedback.append)
    assert producer.calls == 3
    assert len(err.value.reports) == 3
    assert len(feedback) == 2


def test_transient_producer_errors_count_as_attempts():
    producer = _ScriptedProducer([RuntimeError("net down"), "good"])
    outcome = run_with_retries(
        producer, _report_for, RetryPolicy(max_attempts=3), lambda _: None,
        transient=(RuntimeError,),
    )
    assert producer.calls == 2
    assert outcome.attempts == 2


def test_feedback_mentions_expected_date_format():
    schemas = (ParamSchema("date_from", Dtype.DATE),)
    report = validate(envelope(date_from="tomorrow"), schemas, KNOWN)
    text = render_feedback(report, RetryPolicy())
    assert "YYYY-MM-DD" in text


def test_policy_requires_positive_attempts():
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)
