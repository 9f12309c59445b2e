"""Scoring: three context-based metrics plus ground-truth correctness, 0 to 5.

Each metric can be scored by a deterministic rule table (hermetic runs), by a
model via the backend (live runs), or, for correctness, by a human at an
interactive prompt. Judges never learn which retrieval path produced an
answer.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .. import schemaguard
from ..backends import Backend, ChatMessage, ResponseKind, Role, ToolDescriptor
from ..backends.base import BackendError
from ..plantdb import QueryResultSet
from ..schemaguard import (
    Dtype,
    ParamSchema,
    RetryExhausted,
    RetryPolicy,
    ValidationReport,
    Violation,
    ViolationCode,
)


class Metric(Enum):
    ANSWER_RELEVANCE = "ANSWER_RELEVANCE"
    RELEVANCE = "RELEVANCE"
    FAITHFULNESS = "FAITHFULNESS"
    CORRECTNESS = "CORRECTNESS"


class JudgeKind(Enum):
    LLM = "LLM"
    HUMAN = "HUMAN"
    RULES = "RULES"


@dataclass(frozen=True)
class JudgedScore:
    case_id: str
    metric: Metric
    score: int
    rationale: str
    judge: JudgeKind

    def __post_init__(self) -> None:
        if self.score not in (0, 1, 2, 3, 4, 5):
            raise ValueError("score must be an integer 0..5")

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "metric": self.metric.value,
            "score": self.score,
            "rationale": self.rationale,
            "judge": self.judge.value,
        }


_NO_DATA_RE = re.compile(
    r"no (matching )?(data|records?|results?)|could not (retrieve|find)|couldn t|"
    r"nothing (was )?found|not found|no work (orders?|requests?)",
)

_STOP_SMALL = {
    "the", "a", "an", "is", "are", "was", "were", "of", "in", "on", "at", "to",
    "for", "and", "or", "there", "has", "have", "this", "that", "it", "me",
    "all", "any", "show", "how", "many", "filed", "against", "by", "what",
    "which", "please", "do", "does", "i", "you",
}


def _norm(text: str) -> str:
    lowered = text.lower().replace("’", "'")
    cleaned = re.sub(r"[^a-z0-9'\-]+", " ", lowered)
    return re.sub(r"\s+", " ", cleaned).strip()


def _words(text: str) -> set[str]:
    return {w for w in _norm(text).split() if w not in _STOP_SMALL}


def _digit_tokens(text: str) -> set[str]:
    return {w for w in _norm(text).split() if any(c.isdigit() for c in w)}


def _contains_atom(normalized_answer: str, atom: str) -> bool:
    if not atom:
        return True
    return f" {atom} " in f" {normalized_answer} "


def _row_atoms(rows: QueryResultSet) -> set[str]:
    return {_norm(str(cell)) for row in rows.rows for cell in row if str(cell).strip()}


def _is_no_data(answer: str) -> bool:
    return bool(_NO_DATA_RE.search(_norm(answer)))


# -- rule tables ---------------------------------------------------------------


def _rules_answer_relevance(question: str, answer: str) -> tuple[int, str]:
    if not answer.strip():
        return 0, "empty answer"
    q_words = _words(question)
    if not q_words:
        return 4, "question carries no content words to compare"
    share = len(q_words & _words(answer)) / len(q_words)
    if share >= 0.5:
        return 5, f"answer covers {share:.0%} of the question's terms"
    if share >= 0.25:
        return 4, f"answer covers {share:.0%} of the question's terms"
    if share > 0:
        return 3, "answer touches the question only loosely"
    if _is_no_data(answer):
        return 2, "answer reports absence without engaging the question terms"
    return 1, "answer does not engage the question"


def _rules_relevance(question: str, answer: str, rows: QueryResultSet) -> tuple[int, str]:
    n_answer = _norm(answer)
    if rows.row_count == 0:
        if _is_no_data(answer):
            return 4, "no rows were available and the answer says so"
        return 2, "no rows were available but the answer does not acknowledge it"
    used = any(_contains_atom(n_answer, atom) for atom in _row_atoms(rows))
    q_overlap = bool(_words(question) & _words(answer))
    if used and q_overlap:
        return 5, "answer integrates the retrieved rows and the question"
    if used:
        return 4, "answer uses the retrieved rows"
    if _is_no_data(answer):
        return 2, "rows were retrieved but the answer claims there are none"
    return 1, "answer ignores the retrieved rows"


def _rules_faithfulness(question: str, answer: str, rows: QueryResultSet) -> tuple[int, str]:
    # Tokens restated from the question are not data claims.
    claims = _digit_tokens(answer) - _digit_tokens(question)
    if rows.row_count == 0:
        if claims:
            return 0, "asserts figures although the context holds no rows"
        if _is_no_data(answer):
            return 5, "honestly reports that the context holds no data"
        return 3, "context is empty and the answer makes no claims"
    support = set()
    for atom in _row_atoms(rows):
        support.update(w for w in atom.split() if any(c.isdigit() for c in w))
    support.add(str(rows.row_count))
    unsupported = claims - support
    if not claims:
        return 4, "answer makes no figure claims beyond the question"
    if not unsupported:
        return 5, "every figure in the answer appears in the context rows"
    if unsupported != claims:
        return 1, f"some figures are unsupported by the context: {sorted(unsupported)}"
    return 0, f"figures contradict the context: {sorted(unsupported)}"


def _rules_correctness(
    answer: str, ground_truth_answer: str, ground_truth_rows: QueryResultSet | None
) -> tuple[int, str]:
    n_answer = _norm(answer)
    n_gt = _norm(ground_truth_answer)
    if n_answer == n_gt:
        return 5, "matches the ground truth exactly"

    # Required facts are the curated rows; the ground-truth text only widens
    # the set of figures that do not count as errors (subject restatements,
    # derived counts).
    if ground_truth_rows is not None:
        gt_atoms = _row_atoms(ground_truth_rows)
    else:
        gt_atoms = _digit_tokens(ground_truth_answer)
    gt_digit_support = {w for atom in gt_atoms for w in atom.split() if any(c.isdigit() for c in w)}
    gt_digit_support |= _digit_tokens(ground_truth_answer)
    if ground_truth_rows is not None:
        gt_digit_support.add(str(ground_truth_rows.row_count))
    answer_digits = _digit_tokens(answer)
    wrong = answer_digits - gt_digit_support
    no_data = _is_no_data(answer)

    if not gt_atoms:
        # Ground truth itself states an absence or a purely verbal fact.
        if _words(ground_truth_answer) <= _words(answer) and not wrong:
            return 5, "covers the ground truth statement"
        if no_data and not wrong:
            return 4, "states the same absence in different words"
        if wrong:
            return 0, "fabricates figures where the ground truth has none"
        return 2, "no incorrect information but the response is indeterminate"

    if no_data:
        return 2, "reports no data although an answer exists; nothing incorrect stated"

    present = [atom for atom in gt_atoms if _contains_atom(n_answer, atom)]
    contains_all = len(present) == len(gt_atoms)
    if contains_all and not wrong:
        if _words(ground_truth_answer) <= _words(answer):
            return 5, "complete and phrased equivalently to the ground truth"
        return 4, "all ground-truth facts present but expressed poorly"
    if present and wrong:
        return 1, f"mixes correct elements with incorrect figures {sorted(wrong)}"
    if present:
        return 3, "partially covers the ground truth without errors, but is vague"
    if wrong:
        return 0, "contradicts the ground truth"
    return 0, "does not answer with any ground-truth fact"


# -- model-backed judging ------------------------------------------------------

SCORE_TOOL = ToolDescriptor(
    name="record_score",
    description="Record an integer score from 0 to 5 with a one-sentence rationale.",
    parameters=(
        ParamSchema("score", Dtype.INTEGER, description="integer 0..5"),
        ParamSchema("rationale", Dtype.STRING, description="one sentence"),
    ),
)

_RUBRICS = {
    Metric.ANSWER_RELEVANCE: (
        "Score 0-5 how well the answer addresses the user's question on its own, with no "
        "other context: it should respond directly and clearly, cover everything the "
        "question asks without unrelated additions, and use language that fits the "
        "question's subject."
    ),
    Metric.RELEVANCE: (
        "Score 0-5 how well the answer serves both the question and the attached query "
        "results: it should integrate the retrieved data, stay aligned with question and "
        "data at once, and avoid any disconnect between the two."
    ),
    Metric.FAITHFULNESS: (
        "Score 0-5 how strictly the answer sticks to the attached query results: every "
        "claim must be supported by the rows, with no extrapolation or additions beyond "
        "what they show."
    ),
    Metric.CORRECTNESS: (
        "Score 0-5 the factual accuracy of the answer against the attached ground truth: "
        "5 is an answer another subject-matter expert could have given, 4 is correct but "
        "poorly expressed, 3 is correct but too vague to settle the question, 2 contains "
        "no incorrect information but stays indeterminate, 1 mixes correct and incorrect "
        "elements, 0 is wrong or does not answer."
    ),
}


def _score_range_validator(response) -> ValidationReport:
    base = schemaguard.validate(
        response.tool_call, SCORE_TOOL.parameters, {SCORE_TOOL.name}
    ) if response.kind is ResponseKind.TOOL_CALL else ValidationReport(
        ok=False,
        violations=(
            Violation("record_score", ViolationCode.UNKNOWN_TOOL, "expected a record_score call"),
        ),
    )
    if not base.ok:
        return base
    assert base.coerced_arguments is not None
    score = base.coerced_arguments["score"]
    if score not in (0, 1, 2, 3, 4, 5):
        return ValidationReport(
            ok=False,
            violations=(
                Violation("score", ViolationCode.NOT_IN_ENUM, "score must be between 0 and 5"),
            ),
        )
    return base


def _llm_score(
    metric: Metric, payload: dict[str, Any], backend: Backend, case_id: str
) -> JudgedScore | None:
    conversation = [
        ChatMessage(role=Role.SYSTEM, content=_RUBRICS[metric]),
        ChatMessage(role=Role.USER, content=json.dumps(payload, sort_keys=True)),
    ]

    def produce():
        return backend.complete(conversation, [SCORE_TOOL])

    def feedback_sink(text: str) -> None:
        conversation.append(ChatMessage(role=Role.SYSTEM, content=text))

    try:
        outcome = schemaguard.run_with_retries(
            produce, _score_range_validator, RetryPolicy(), feedback_sink,
            transient=(BackendError,),
        )
    except RetryExhausted:
        return None
    arguments = outcome.report.coerced_arguments
    assert arguments is not None
    return JudgedScore(
        case_id=case_id,
        metric=metric,
        score=int(arguments["score"]),
        rationale=str(arguments.get("rationale", "")),
        judge=JudgeKind.LLM,
    )


def judge_metric(
    metric: Metric,
    question: str,
    answer: str,
    context_rows: QueryResultSet | None,
    judge: JudgeKind = JudgeKind.RULES,
    backend: Backend | None = None,
    case_id: str = "",
) -> JudgedScore | None:
    """Score one of the three context-based metrics. Returns None when unscorable."""
    if metric is Metric.CORRECTNESS:
        raise ValueError("use score_correctness for the ground-truth metric")
    if metric is Metric.ANSWER_RELEVANCE and context_rows is not None:
        raise ValueError("ANSWER_RELEVANCE is query-only and must not receive context")
    if metric in (Metric.RELEVANCE, Metric.FAITHFULNESS) and context_rows is None:
        raise ValueError(f"{metric.value} requires context_rows")

    if judge is JudgeKind.RULES:
        if metric is Metric.ANSWER_RELEVANCE:
            score, rationale = _rules_answer_relevance(question, answer)
        elif metric is Metric.RELEVANCE:
            assert context_rows is not None
            score, rationale = _rules_relevance(question, answer, context_rows)
        else:
            assert context_rows is not None
            score, rationale = _rules_faithfulness(question, answer, context_rows)
        return JudgedScore(
            case_id=case_id, metric=metric, score=score, rationale=rationale,
            judge=JudgeKind.RULES,
        )

    if judge is JudgeKind.LLM:
        if backend is None:
            raise ValueError("LLM judging requires a backend")
        payload: dict[str, Any] = {"question": question, "answer": answer}
        if context_rows is not None:
            payload["context"] = context_rows.to_dict()
        return _llm_score(metric, payload, backend, case_id)

    raise ValueError(f"{metric.value} supports RULES or LLM judges only")


def score_correctness(
    answer: str,
    ground_truth_answer: str,
    ground_truth_rows: QueryResultSet | None = None,
    judge: JudgeKind = JudgeKind.RULES,
    backend: Backend | None = None,
    case_id: str = "",
    question: str = "",
) -> JudgedScore | None:
    """Score factual accuracy against the curated ground truth."""
    if judge is JudgeKind.RULES:
        score, rationale = _rules_correctness(answer, ground_truth_answer, ground_truth_rows)
        return JudgedScore(
            case_id=case_id, metric=Metric.CORRECTNESS, score=score, rationale=rationale,
            judge=JudgeKind.RULES,
        )
    if judge is JudgeKind.HUMAN:
        print(f"\nQuestion: {question}\nAnswer: {answer}\nGround truth: {ground_truth_answer}")
        while True:
            entered = input("SME correctness score (0-5): ").strip()
            if entered in {"0", "1", "2", "3", "4", "5"}:
                return JudgedScore(
                    case_id=case_id,
                    metric=Metric.CORRECTNESS,
                    score=int(entered),
                    rationale="entered by SME",
                    judge=JudgeKind.HUMAN,
                )
            print("Enter an integer between 0 and 5.")
    if judge is JudgeKind.LLM:
        if backend is None:
            raise ValueError("LLM judging requires a backend")
        payload: dict[str, Any] = {
            "question": question,
            "answer": answer,
            "ground_truth": ground_truth_answer,
        }
        if ground_truth_rows is not None:
            payload["ground_truth_rows"] = ground_truth_rows.to_dict()
        score = _llm_score(Metric.CORRECTNESS, payload, backend, case_id)
        return score
    raise ValueError(f"unsupported judge {judge}")
