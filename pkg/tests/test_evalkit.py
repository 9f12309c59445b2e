from __future__ import annotations

import json

import pytest

from plantquery.audit import AuditStore, PathKind
from plantquery.backends import BackendResponse, RulesBackend
from plantquery.evalkit import (
    EvalCase,
    FaultInjectingBackend,
    FaultPlan,
    HermeticComparison,
    JudgeKind,
    Metric,
    ProfileRates,
    hermetic_fault_plans,
    judge_metric,
    load_cases_file,
    run_comparison,
    score_correctness,
)
from plantquery.plantdb import EMPTY_RESULT, QueryResultSet
from plantquery.schemaguard import ToolCallEnvelope

ROWS = QueryResultSet(columns=("wo_count",), rows=((10,),))
WR_ROWS = QueryResultSet(
    columns=("wr_id", "entered_by"),
    rows=(("WR-9001", "John Smith"), ("WR-9002", "John Smith")),
)


# -- judge_metric rules ----------------------------------------------------------


def test_answer_relevance_rejects_context():
    with pytest.raises(ValueError):
        judge_metric(Metric.ANSWER_RELEVANCE, "q", "a", ROWS)


def test_context_metrics_require_context():
    with pytest.raises(ValueError):
        judge_metric(Metric.RELEVANCE, "q", "a", None)
    with pytest.raises(ValueError):
        judge_metric(Metric.FAITHFULNESS, "q", "a", None)


def test_correctness_goes_through_score_correctness():
    with pytest.raises(ValueError):
        judge_metric(Metric.CORRECTNESS, "q", "a", None)


def test_answer_relevance_band():
    question = "how many work orders are filed against SG2"
    high = judge_metric(Metric.ANSWER_RELEVANCE, question,
                        "There are 10 work orders against SG2.", None)
    low = judge_metric(Metric.ANSWER_RELEVANCE, question, "Bananas are yellow.", None)
    assert high.score >= 4
    assert low.score <= 1


def test_faithfulness_contradiction_lands_in_low_band():
    judged = judge_metric(
        Metric.FAITHFULNESS, "how many work orders are filed against SG2",
        "There are 999 work orders against SG2.", ROWS,
    )
    assert judged.score <= 1


def test_faithfulness_supported_claims_score_high():
    judged = judge_metric(
        Metric.FAITHFULNESS, "how many work orders are filed against SG2",
        "There are 10 work orders against SG2.", ROWS,
    )
    assert judged.score == 5


def test_insensitivity_property_honest_no_data():
    # Retrieval failed; the answer honestly reports absence.
    answer = "I could not retrieve the data for this question from the maintenance database."
    faith = judge_metric(Metric.FAITHFULNESS, "how many work orders against SG2",
                         answer, EMPTY_RESULT)
    correct = score_correctness(
        answer, "There are 10 work orders against SG2.", ROWS,
    )
    assert faith.score >= 4
    assert correct.score <= 2


def test_relevance_uses_rows(capsys):
    used = judge_metric(
        Metric.RELEVANCE, "list work requests by John Smith",
        "John Smith entered WR-9001 and WR-9002.", WR_ROWS,
    )
    ignored = judge_metric(
        Metric.RELEVANCE, "list work requests by John Smith",
        "No records found.", WR_ROWS,
    )
    assert used.score == 5
    assert ignored.score <= 2


# -- correctness scale -----------------------------------------------------------


def test_correctness_exact_match_is_five():
    judged = score_correctness(
        "There are 10 work orders against SG2.",
        "There are 10 work orders against SG2.", ROWS,
    )
    assert judged.score == 5
    assert judged.metric is Metric.CORRECTNESS


def test_correctness_right_value_ugly_format_is_four():
    judged = score_correctness("result: 10 rows", "There are 10 work orders against SG2.", ROWS)
    assert judged.score == 4


def test_correctness_honest_no_data_is_two():
    judged = score_correctness(
        "I could not retrieve the data.", "There are 10 work orders against SG2.", ROWS
    )
    assert judged.score == 2


def test_correctness_fabricated_value_is_zero():
    judged = score_correctness(
        "There are 999 work orders against SG2.",
        "There are 10 work orders against SG2.", ROWS,
    )
    assert judged.score == 0


def test_correctness_mixed_is_one():
    judged = score_correctness(
        "WR-9001 and WR-7777 belong to John Smith",
        "John Smith entered 2 work requests: WR-9001, WR-9002.",
        WR_ROWS,
    )
    assert judged.score == 1


def test_correctness_partial_but_clean_is_three():
    judged = score_correctness(
        "One of them is WR-9001.",
        "John Smith entered WR-9001, WR-9002.",
        WR_ROWS,
    )
    assert judged.score == 3


def test_correctness_human_judge_reads_input(monkeypatch):
    entries = iter(["9", "4"])
    monkeypatch.setattr("builtins.input", lambda _: next(entries))
    judged = score_correctness("a", "b", judge=JudgeKind.HUMAN, question="q")
    assert judged.score == 4
    assert judged.judge is JudgeKind.HUMAN


def test_llm_judge_with_scripted_scorer():
    class ScoreBackend:
        def complete(self, messages, tools):
            return BackendResponse.from_tool_call(
                ToolCallEnvelope("record_score", {"score": 3, "rationale": "meh"}, "s1")
            )

    judged = judge_metric(
        Metric.ANSWER_RELEVANCE, "q", "a", None, judge=JudgeKind.LLM, backend=ScoreBackend()
    )
    assert judged.score == 3
    assert judged.judge is JudgeKind.LLM


def test_llm_judge_unscorable_returns_none():
    class BadBackend:
        def complete(self, messages, tools):
            return BackendResponse.from_tool_call(
                ToolCallEnvelope("record_score", {"score": 11, "rationale": "nope"}, "s1")
            )

    judged = judge_metric(
        Metric.ANSWER_RELEVANCE, "q", "a", None, judge=JudgeKind.LLM, backend=BadBackend()
    )
    assert judged is None


# -- fault profile ---------------------------------------------------------------


def test_fault_plan_assignment_is_positional():
    rates = ProfileRates()
    fc, nfc = hermetic_fault_plans(3, rates)
    assert fc.wrong_route_first
    assert nfc.corrupt_entities
    fc, nfc = hermetic_fault_plans(1, rates)
    assert not fc.wrong_route_first
    assert nfc.force_generated and nfc.corrupt_draft_field
    fc, nfc = hermetic_fault_plans(0, rates)
    assert not fc.any and not nfc.any


def test_injector_redirects_first_route_only():
    from plantquery.backends import ChatMessage, Role, ToolDescriptor
    from plantquery.schemaguard import Dtype, ParamSchema

    tools = [
        ToolDescriptor("route_equipment", "eq", (ParamSchema("query", Dtype.STRING),)),
        ToolDescriptor("route_work_order", "wo", (ParamSchema("query", Dtype.STRING),)),
    ]
    backend = FaultInjectingBackend(RulesBackend(), FaultPlan(wrong_route_first=True))
    messages = [
        ChatMessage(role=Role.SYSTEM, content="router"),
        ChatMessage(role=Role.USER, content="how many work orders against SG2"),
    ]
    first = backend.complete(messages, tools)
    assert first.tool_call.tool_name == "route_equipment"  # swapped away from work_order
    second = backend.complete(messages, tools)
    assert second.tool_call.tool_name == "route_work_order"  # injector disarmed


def test_injector_corrupts_draft_fields():
    class DraftBackend:
        def complete(self, messages, tools):
            return BackendResponse.from_tool_call(
                ToolCallEnvelope(
                    "draft_sql",
                    {"sql": "SELECT wr_id, entered_by FROM work_request", "explanation": "x"},
                    "d1",
                )
            )

    backend = FaultInjectingBackend(DraftBackend(), FaultPlan(corrupt_draft_field=True))
    response = backend.complete(
        [__import__("plantquery").backends.ChatMessage(
            role=__import__("plantquery").backends.Role.SYSTEM, content="s")],
        [],
    )
    assert "originator" in response.tool_call.arguments["sql"]


# -- run_comparison --------------------------------------------------------------


def _mini_cases():
    return [
        EvalCase("m1", "how many work orders against SG2",
                 "There are 10 work orders against SG2.", ROWS),
        EvalCase("m2", "who entered WR-9001", "John Smith entered WR-9001.", WR_ROWS),
    ]


def test_identical_answers_score_identically():
    def runner(case, index):
        from plantquery.evalkit.comparison import PathResult

        return PathResult(answer=case.ground_truth_answer,
                          context_rows=case.ground_truth_rows, status="OK")

    report = run_comparison(
        _mini_cases(),
        {PathKind.FUNCTION_CALLING: runner, PathKind.NL2SQL: runner},
    )
    for metric in Metric:
        assert report.means["FUNCTION_CALLING"][metric.value] == (
            report.means["NL2SQL"][metric.value]
        )


def test_report_means_recomputable_from_matrix():
    def runner(case, index):
        from plantquery.evalkit.comparison import PathResult

        return PathResult(answer=case.ground_truth_answer,
                          context_rows=case.ground_truth_rows, status="OK")

    report = run_comparison(
        _mini_cases(),
        {PathKind.FUNCTION_CALLING: runner, PathKind.NL2SQL: runner},
    )
    for path, metrics in report.means.items():
        for metric, mean in metrics.items():
            scores = [
                entry["scores"][metric]["score"]
                for entry in report.matrix
                if entry["path"] == path and metric in entry["scores"]
            ]
            assert mean == round(sum(scores) / len(scores), 4)
            distribution = report.distributions[path][metric]
            assert sum(distribution.values()) == len(scores)


def test_crashing_path_scores_zero_and_run_continues():
    from plantquery.evalkit.comparison import PathResult

    def good(case, index):
        return PathResult(answer=case.ground_truth_answer,
                          context_rows=case.ground_truth_rows, status="OK")

    def crash(case, index):
        raise RuntimeError("boom")

    report = run_comparison(
        _mini_cases(), {PathKind.FUNCTION_CALLING: good, PathKind.NL2SQL: crash}
    )
    assert report.means["NL2SQL"][Metric.CORRECTNESS.value] == 0.0
    failed = [e for e in report.matrix if e["path"] == "NL2SQL"]
    assert all("FAILED" in e["tags"] for e in failed)
    assert report.unscored  # the other metrics were not judged


def test_judges_are_blind_to_path(monkeypatch):
    seen_payloads = []
    import plantquery.evalkit.comparison as comparison_module

    original = comparison_module.judge_metric

    def spying_judge(metric, question, answer, context_rows, **kwargs):
        seen_payloads.append((question, answer))
        return original(metric, question, answer, context_rows, **kwargs)

    monkeypatch.setattr(comparison_module, "judge_metric", spying_judge)

    from plantquery.evalkit.comparison import PathResult

    def runner(case, index):
        return PathResult(answer=case.ground_truth_answer,
                          context_rows=case.ground_truth_rows, status="OK")

    run_comparison(_mini_cases(), {PathKind.FUNCTION_CALLING: runner,
                                   PathKind.NL2SQL: runner})
    for question, answer in seen_payloads:
        assert "FUNCTION_CALLING" not in question + answer
        assert "NL2SQL" not in question + answer


def test_cases_file_round_trip(tmp_path):
    cases = _mini_cases()
    path = tmp_path / "cases.jsonl"
    path.write_text(
        "\n".join(json.dumps(c.to_dict(), sort_keys=True) for c in cases), encoding="utf-8"
    )
    loaded = load_cases_file(path)
    assert [c.to_dict() for c in loaded] == [c.to_dict() for c in cases]


def test_golden_cases_ground_truths_match_fixture(seeded_db):
    # The shipped suite's ground-truth rows must agree with a live seed-42 DB.
    from plantquery import plantdb
    from plantquery.config import packaged_data_path

    cases = load_cases_file(packaged_data_path("golden_cases.jsonl"))
    assert len(cases) == 20
    by_id = {c.case_id: c for c in cases}
    sg2 = plantdb.execute_parameterized(
        seeded_db,
        "SELECT COUNT(*) AS wo_count FROM work_order WHERE equip_id = ? "
        "OR equip_id LIKE '%-' || ?",
        ["SG2", "SG2"],
    )
    assert by_id["c00"].ground_truth_rows.rows == sg2.rows
    smith = plantdb.execute_parameterized(
        seeded_db,
        "SELECT wr_id, equip_id, description, entered_by, entered_date FROM work_request "
        "WHERE entered_by = ? ORDER BY entered_date, wr_id",
        ["John Smith"],
    )
    assert by_id["c02"].ground_truth_rows.rows == smith.rows
    assert by_id["c14"].ground_truth_rows is None  # the curated no-data case


def test_hermetic_comparison_end_to_end(seeded_db, registry, domains, catalog, examples,
                                        jargon, tmp_path):
    from plantquery.config import packaged_data_path

    comparison = HermeticComparison(
        db=seeded_db, registry=registry, domains=domains, catalog=catalog,
        examples=examples, audit_store=AuditStore(tmp_path / "eval-audit.db"),
        jargon=jargon,
    )
    cases = load_cases_file(packaged_data_path("golden_cases.jsonl"))
    report = run_comparison(cases, comparison.runners())
    assert report.cases_total == 20
    fc = report.mean(PathKind.FUNCTION_CALLING, Metric.CORRECTNESS)
    nfc = report.mean(PathKind.NL2SQL, Metric.CORRECTNESS)
    assert fc - nfc >= 0.5
    text = report.render_text()
    assert "CORRECTNESS" in text and "c00" in text
