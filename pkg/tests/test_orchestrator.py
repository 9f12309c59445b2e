from __future__ import annotations

import json

import pytest

from plantquery import plantdb
from plantquery.audit import PathKind, StepKind
from plantquery.backends import (
    NO_CAPABILITY_SENTINEL,
    Role,
    RulesBackend,
    ScriptedBackend,
    TransientBackendError,
)
from plantquery.orchestrator import (
    AgentError,
    ConversationState,
    ErrorCode,
    Orchestrator,
    TurnStatus,
    is_followup_resolvable,
)
from plantquery.toolkit import Domain


def make_orchestrator(backend, seeded_db, registry, domains, audit_store, jargon, **kwargs):
    return Orchestrator(
        backend, registry, domains, seeded_db, audit_store, jargon=jargon, **kwargs
    )


@pytest.fixture()
def rules_orchestrator(seeded_db, registry, domains, audit_store, jargon):
    return make_orchestrator(RulesBackend(), seeded_db, registry, domains, audit_store, jargon)


def scripted(lines) -> ScriptedBackend:
    from plantquery.backends.scripted import ScriptEntry, ScriptTable
    from plantquery.backends import BackendResponse

    entries = tuple(
        ScriptEntry(
            contains=line.get("contains", ""),
            response=BackendResponse.from_dict(line["response"]),
            repeat=line.get("repeat", 1),
        )
        for line in lines
    )
    return ScriptedBackend(ScriptTable(entries))


def tool_call(name, arguments, call_id="c1"):
    return {
        "kind": "TOOL_CALL",
        "tool_call": {"tool_name": name, "arguments": arguments, "call_id": call_id},
    }


def text(content):
    return {"kind": "TEXT", "text": content}


def assert_history_invariants(state: ConversationState) -> None:
    assert state.messages[0].role is Role.SYSTEM
    for i, message in enumerate(state.messages):
        if message.role is Role.TOOL:
            previous = state.messages[i - 1]
            assert previous.role is Role.ASSISTANT and previous.tool_call is not None
            assert previous.tool_call.call_id == message.tool_call_id


def sg2_count(db) -> int:
    rows = plantdb.execute_parameterized(db, "SELECT equip_id FROM work_order", []).rows
    return sum(1 for (e,) in rows if e == "056-SG2")


def test_direct_answer_touches_no_db(rules_orchestrator, audit_store):
    state = ConversationState.new("direct-1")
    outcome = rules_orchestrator.handle_turn(state, "What day is it today?")
    assert outcome.status is TurnStatus.OK
    assert outcome.tool_trace == ()
    assert outcome.route_attempts == 0
    assert audit_store.query_records(session_id="direct-1", step_kind=StepKind.SQL_EXECUTED) == []
    route_records = audit_store.query_records(session_id="direct-1", step_kind=StepKind.ROUTE)
    assert [r.payload["decision"] for r in route_records] == ["DIRECT_ANSWER"]
    assert_history_invariants(state)


def test_rules_count_turn_matches_fixture(rules_orchestrator, seeded_db):
    state = ConversationState.new("count-1")
    outcome = rules_orchestrator.handle_turn(
        state, "how many work orders are filed against SG2"
    )
    assert outcome.status is TurnStatus.OK
    assert str(sg2_count(seeded_db)) in outcome.answer
    assert [t.function for t in outcome.tool_trace] == ["count_work_orders_by_equipment"]
    assert outcome.function_attempts == 1
    assert_history_invariants(state)


def test_jargon_expansion_applied_before_main_agent(rules_orchestrator):
    state = ConversationState.new("jargon-1")
    rules_orchestrator.handle_turn(state, "find all the WRs against 056-SG2")
    user_message = state.messages[1]
    assert user_message.role is Role.USER
    assert "WR: Work Request" in user_message.content


def test_scripted_reroute_recovers(seeded_db, registry, domains, audit_store, jargon):
    count = sg2_count(seeded_db)
    backend = scripted(
        [
            {"contains": "how many work orders",
             "response": tool_call("route_equipment", {"query": "count"}, "r1")},
            {"response": text(NO_CAPABILITY_SENTINEL)},
            {"contains": "Route it to a different domain",
             "response": tool_call("route_work_order", {"query": "count"}, "r2")},
            {"response": tool_call(
                "count_work_orders_by_equipment", {"equip_id": "056-SG2"}, "c1")},
            {"contains": "wo_count",
             "response": text(f"There are {count} work orders against 056-SG2.")},
        ]
    )
    orchestrator = make_orchestrator(backend, seeded_db, registry, domains, audit_store, jargon)
    state = ConversationState.new("reroute-1")
    outcome = orchestrator.handle_turn(state, "how many work orders are filed against SG2")
    assert outcome.status is TurnStatus.OK
    assert outcome.route_attempts == 2
    assert str(count) in outcome.answer
    retries = audit_store.query_records(session_id="reroute-1", step_kind=StepKind.RETRY)
    assert [r.payload["kind"] for r in retries] == ["reroute"]
    assert retries[0].payload["failed_domain"] == "EQUIPMENT"
    assert_history_invariants(state)


def test_all_domains_fail_hits_route_cap(seeded_db, registry, domains, audit_store, jargon):
    backend = scripted(
        [
            {"response": tool_call("route_work_order", {"query": "q"}, "r1")},
            {"response": text(NO_CAPABILITY_SENTINEL)},
            {"response": tool_call("route_equipment", {"query": "q"}, "r2")},
            {"response": text(NO_CAPABILITY_SENTINEL)},
        ]
    )
    orchestrator = make_orchestrator(
        backend, seeded_db, registry, domains, audit_store, jargon, r_route=2
    )
    state = ConversationState.new("exhaust-1")
    outcome = orchestrator.handle_turn(state, "please fetch the unfetchable")
    assert outcome.status is TurnStatus.FAILED
    assert outcome.route_attempts == 2
    assert orchestrator.last_error is not None
    assert orchestrator.last_error.code is ErrorCode.ROUTE_EXHAUSTED
    faults = audit_store.query_records(session_id="exhaust-1", step_kind=StepKind.FAULT)
    assert faults and faults[0].payload["code"] == "ROUTE_EXHAUSTED"
    assert outcome.answer  # apologetic text still returned


def test_bad_then_good_argument_costs_two_attempts(
    seeded_db, registry, domains, audit_store, jargon
):
    backend = scripted(
        [
            {"response": tool_call("route_work_order", {"query": "q"}, "r1")},
            {"response": tool_call(
                "count_work_orders_by_equipment", {"equipment_id": "056-SG2"}, "c1")},
            {"contains": "invalid",
             "response": tool_call(
                 "count_work_orders_by_equipment", {"equip_id": "056-SG2"}, "c2")},
            {"response": text("There are some work orders.")},
        ]
    )
    orchestrator = make_orchestrator(backend, seeded_db, registry, domains, audit_store, jargon)
    state = ConversationState.new("retry-1")
    outcome = orchestrator.handle_turn(state, "how many work orders are filed against SG2")
    assert outcome.status is TurnStatus.OK
    assert outcome.function_attempts == 2
    fails = audit_store.query_records(session_id="retry-1", step_kind=StepKind.VALIDATION_FAIL)
    assert len(fails) == 1
    codes = {v["code"] for v in fails[0].payload["violations"]}
    assert codes == {"UNKNOWN_PARAM", "MISSING"}
    assert any(
        m.role is Role.SYSTEM and "invalid" in m.content for m in state.messages
    )
    assert_history_invariants(state)


def test_always_invalid_hits_exact_caps(seeded_db, registry, domains, audit_store, jargon):
    backend = scripted(
        [
            {"response": tool_call("route_work_order", {"query": "q"}, "r1")},
            {"response": tool_call("count_work_orders_by_equipment", {"bogus": 1}, "c1"),
             "repeat": 3},
            {"response": tool_call("route_equipment", {"query": "q"}, "r2")},
            {"response": tool_call("get_equipment_info", {"bogus": 1}, "c2"), "repeat": 3},
        ]
    )
    orchestrator = make_orchestrator(
        backend, seeded_db, registry, domains, audit_store, jargon, r_route=2, r_func=3
    )
    state = ConversationState.new("caps-1")
    outcome = orchestrator.handle_turn(state, "broken run")
    assert outcome.status is TurnStatus.FAILED
    assert outcome.route_attempts == 2
    fails = audit_store.query_records(session_id="caps-1", step_kind=StepKind.VALIDATION_FAIL)
    assert len(fails) == 6  # exactly R_func per route, two routes
    answers = audit_store.query_records(session_id="caps-1", step_kind=StepKind.ANSWER)
    assert answers[0].payload["backend_calls"] == 8  # 1 + 3 + 1 + 3
    assert answers[0].payload["backend_calls"] <= 1 + 2 * (1 + 3)


def test_backend_call_budget_holds_for_rules_runs(rules_orchestrator, audit_store):
    state = ConversationState.new("budget-1")
    for question in (
        "how many work orders are filed against SG2",
        "put that in a table",
        "What parts are on the bill of materials for 056-SG2?",
    ):
        rules_orchestrator.handle_turn(state, question)
    bound = 1 + rules_orchestrator.r_route * (1 + rules_orchestrator.r_func)
    for record in audit_store.query_records(session_id="budget-1", step_kind=StepKind.ANSWER):
        assert record.payload["backend_calls"] <= bound


def test_followup_formats_without_new_retrieval(rules_orchestrator, audit_store):
    state = ConversationState.new("follow-1")
    rules_orchestrator.handle_turn(state, "how many work orders are filed against SG2")
    sql_before = len(audit_store.query_records(session_id="follow-1",
                                               step_kind=StepKind.SQL_EXECUTED))
    assert is_followup_resolvable(state, "put that in a table")
    outcome = rules_orchestrator.handle_turn(state, "put that in a table")
    sql_after = len(audit_store.query_records(session_id="follow-1",
                                              step_kind=StepKind.SQL_EXECUTED))
    assert outcome.status is TurnStatus.OK
    assert outcome.tool_trace == ()
    assert sql_after == sql_before
    assert "|" in outcome.answer  # tabular rendering
    assert_history_invariants(state)


def test_followup_with_new_equipment_retrieves_again(rules_orchestrator, audit_store):
    state = ConversationState.new("follow-2")
    rules_orchestrator.handle_turn(state, "how many work orders are filed against SG2")
    assert not is_followup_resolvable(state, "how many work orders are filed against 664-SG3")
    outcome = rules_orchestrator.handle_turn(
        state, "how many work orders are filed against 664-SG3"
    )
    assert len(outcome.tool_trace) == 1
    sql_records = audit_store.query_records(session_id="follow-2",
                                            step_kind=StepKind.SQL_EXECUTED)
    assert len(sql_records) == 2


def test_followup_on_fresh_history_is_fresh_query(rules_orchestrator):
    state = ConversationState.new("follow-3")
    assert not is_followup_resolvable(state, "put that in a table")
    outcome = rules_orchestrator.handle_turn(state, "put that in a table")
    assert outcome.status is TurnStatus.OK  # treated as a fresh (direct) query


def test_sub_agent_given_out_of_domain_question_errors(
    seeded_db, registry, domains, audit_store, jargon
):
    orchestrator = make_orchestrator(
        RulesBackend(), seeded_db, registry, domains, audit_store, jargon
    )
    state = ConversationState.new("sub-1")
    state.turn_counter = 1
    from plantquery.backends import ChatMessage

    state.messages.append(
        ChatMessage(role=Role.USER, content="How many units of part BRG-2205 are in stock?")
    )
    equipment = next(d for d in domains if d.domain is Domain.EQUIPMENT)
    with pytest.raises(AgentError) as err:
        orchestrator.sub_agent_turn(equipment, state)
    assert err.value.code is ErrorCode.NO_MATCHING_FUNCTION


def test_no_data_status_for_empty_list_results(rules_orchestrator):
    state = ConversationState.new("nodata-1")
    outcome = rules_orchestrator.handle_turn(
        state, "Show me all the work requests entered in by Alex Morgan"
    )
    assert outcome.status is TurnStatus.NO_DATA
    assert "no matching records" in outcome.answer.lower()


class FlakyBackend:
    def __init__(self, inner, failures):
        self.inner = inner
        self.failures = failures

    def complete(self, messages, tools):
        if self.failures:
            self.failures -= 1
            raise TransientBackendError("transient blip")
        return self.inner.complete(messages, tools)


def test_transient_backend_failure_retried_once(
    seeded_db, registry, domains, audit_store, jargon
):
    orchestrator = make_orchestrator(
        FlakyBackend(RulesBackend(), failures=1),
        seeded_db, registry, domains, audit_store, jargon,
    )
    state = ConversationState.new("flaky-1")
    outcome = orchestrator.handle_turn(state, "What day is it today?")
    assert outcome.status is TurnStatus.OK
    retries = audit_store.query_records(session_id="flaky-1", step_kind=StepKind.RETRY)
    assert [r.payload["kind"] for r in retries] == ["backend_transient"]


def test_persistent_backend_failure_fails_turn(
    seeded_db, registry, domains, audit_store, jargon
):
    orchestrator = make_orchestrator(
        FlakyBackend(RulesBackend(), failures=10),
        seeded_db, registry, domains, audit_store, jargon,
    )
    state = ConversationState.new("flaky-2")
    outcome = orchestrator.handle_turn(state, "What day is it today?")
    assert outcome.status is TurnStatus.FAILED
    assert orchestrator.last_error.code is ErrorCode.BACKEND_FAILURE


def test_hermetic_runs_are_byte_deterministic(tmp_path, registry, domains, jargon):
    from plantquery.audit import AuditStore

    outcomes = []
    transcripts = []
    for name in ("a", "b"):
        db = plantdb.init_schema(tmp_path / f"{name}.db")
        plantdb.seed_fixture(db, 42)
        store = AuditStore(tmp_path / f"{name}-audit.db")
        orchestrator = make_orchestrator(RulesBackend(), db, registry, domains, store, jargon)
        state = ConversationState.new("det-1")
        run = [
            orchestrator.handle_turn(state, "how many work orders are filed against SG2"),
            orchestrator.handle_turn(state, "put that in a table"),
        ]
        outcomes.append(json.dumps([o.to_dict() for o in run], sort_keys=True))
        transcripts.append(state.transcript_json())
    assert outcomes[0] == outcomes[1]
    assert transcripts[0] == transcripts[1]


def test_guardrail_every_executed_sql_is_registered(
    rules_orchestrator, audit_store, registry, seeded_db
):
    state = ConversationState.new("guard-1")
    for question in (
        "how many work orders are filed against SG2",
        "How many units of part BRG-2205 are in stock?",
        "What parts are on the bill of materials for 056-SG2?",
    ):
        rules_orchestrator.handle_turn(state, question)
    templates = registry.templates()
    records = audit_store.query_records(
        session_id="guard-1", step_kind=StepKind.SQL_EXECUTED, path=PathKind.FUNCTION_CALLING
    )
    assert records
    for record in records:
        assert record.payload["sql"] in templates
