"""Side-by-side evaluation of the two retrieval paths over one case suite."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from ..audit import AuditStore, PathKind
from ..backends import Backend, RulesBackend
from ..nl2sql import Nl2SqlPipeline, SchemaCatalog
from ..nl2sql.retrieval import ExampleEntry
from ..orchestrator import ConversationState, Orchestrator
from ..plantdb import EMPTY_RESULT, PlantDb, QueryResultSet
from ..toolkit import FunctionRegistry, JargonEntry, SubAgentDomain
from .judges import JudgedScore, JudgeKind, Metric, judge_metric, score_correctness
from .profiles import FaultInjectingBackend, ProfileRates, hermetic_fault_plans


@dataclass(frozen=True)
class EvalCase:
    """One question with its curated ground truth."""

    case_id: str
    question: str
    ground_truth_answer: str
    ground_truth_rows: QueryResultSet | None = None
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.ground_truth_answer:
            raise ValueError("ground_truth_answer must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "question": self.question,
            "ground_truth_answer": self.ground_truth_answer,
            "ground_truth_rows": self.ground_truth_rows.to_dict()
            if self.ground_truth_rows
            else None,
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "EvalCase":
        rows = payload.get("ground_truth_rows")
        return cls(
            case_id=payload["case_id"],
            question=payload["question"],
            ground_truth_answer=payload["ground_truth_answer"],
            ground_truth_rows=QueryResultSet.from_dict(rows) if rows else None,
            tags=tuple(payload.get("tags", [])),
        )


def load_cases_file(path: str | Path) -> list[EvalCase]:
    cases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            cases.append(EvalCase.from_dict(json.loads(line)))
    return cases


@dataclass
class PathResult:
    answer: str
    context_rows: QueryResultSet
    status: str
    failed: bool = False
    detail: str = ""


PathRunner = Callable[[EvalCase, int], PathResult]


@dataclass
class EvalReport:
    """Means, distributions, and the per-case score matrix for both paths."""

    cases_total: int
    judge: str
    means: dict[str, dict[str, float]]
    distributions: dict[str, dict[str, dict[str, int]]]
    matrix: list[dict[str, Any]]
    unscored: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "cases_total": self.cases_total,
            "judge": self.judge,
            "means": self.means,
            "distributions": self.distributions,
            "matrix": self.matrix,
            "unscored": self.unscored,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def mean(self, path: PathKind, metric: Metric) -> float:
        return self.means[path.value][metric.value]

    def score_count(self, path: PathKind, metric: Metric, score: int) -> int:
        return self.distributions[path.value][metric.value].get(str(score), 0)

    def render_text(self) -> str:
        lines = [f"Evaluation of {self.cases_total} cases (judge: {self.judge})", ""]
        paths = sorted(self.means)
        header = f"{'metric':24}" + "".join(f"{p:>20}" for p in paths)
        lines.append(header)
        for metric in (m.value for m in Metric):
            row = f"{metric:24}"
            for path in paths:
                value = self.means[path].get(metric)
                row += f"{value:>20.2f}" if value is not None else f"{'-':>20}"
            lines.append(row)
        lines.append("")
        lines.append(f"{'case_id':28}" + "".join(f"{p:>20}" for p in paths) + "  (correctness)")
        by_case: dict[str, dict[str, int | None]] = {}
        for entry in self.matrix:
            scores = entry.get("scores", {})
            correctness = scores.get(Metric.CORRECTNESS.value)
            by_case.setdefault(entry["case_id"], {})[entry["path"]] = (
                correctness["score"] if correctness else None
            )
        for case_id in sorted(by_case):
            row = f"{case_id:28}"
            for path in paths:
                value = by_case[case_id].get(path)
                row += f"{value:>20}" if value is not None else f"{'-':>20}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def _blank_distribution() -> dict[str, int]:
    return {str(s): 0 for s in range(6)}


def run_comparison(
    cases: Sequence[EvalCase],
    runners: dict[PathKind, PathRunner],
    judge: JudgeKind = JudgeKind.RULES,
    backend: Backend | None = None,
) -> EvalReport:
    """Run every case through both paths and score all four metrics blind.

    Judge inputs carry the question, answer, context rows, and ground truth
    only; the producing path is never named. Per-case path crashes score a 0
    for correctness with a FAILED tag and the run continues.
    """
    if not cases:
        raise ValueError("need at least one case")
    ordered = sorted(cases, key=lambda c: c.case_id)
    matrix: list[dict[str, Any]] = []
    unscored: list[dict[str, Any]] = []
    sums: dict[str, dict[str, list[int]]] = {}
    distributions: dict[str, dict[str, dict[str, int]]] = {}

    for index, case in enumerate(ordered):
        for path in (PathKind.FUNCTION_CALLING, PathKind.NL2SQL):
            runner = runners[path]
            try:
                result = runner(case, index)
            except Exception as exc:  # noqa: BLE001 - a path crash must not stop the run
                result = PathResult(
                    answer="", context_rows=EMPTY_RESULT, status="CRASHED",
                    failed=True, detail=str(exc),
                )
            entry: dict[str, Any] = {
                "case_id": case.case_id,
                "path": path.value,
                "answer": result.answer,
                "status": result.status,
                "tags": list(case.tags) + (["FAILED"] if result.failed else []),
                "scores": {},
            }
            scores: list[JudgedScore | None] = []
            if result.failed:
                correctness = JudgedScore(
                    case_id=case.case_id,
                    metric=Metric.CORRECTNESS,
                    score=0,
                    rationale=f"path crashed: {result.detail}",
                    judge=judge,
                )
                scores.append(correctness)
                for metric in (Metric.ANSWER_RELEVANCE, Metric.RELEVANCE, Metric.FAITHFULNESS):
                    unscored.append(
                        {"case_id": case.case_id, "path": path.value, "metric": metric.value,
                         "reason": "path crashed"}
                    )
            else:
                scores.append(
                    judge_metric(
                        Metric.ANSWER_RELEVANCE, case.question, result.answer, None,
                        judge=judge, backend=backend, case_id=case.case_id,
                    )
                )
                for metric in (Metric.RELEVANCE, Metric.FAITHFULNESS):
                    scores.append(
                        judge_metric(
                            metric, case.question, result.answer, result.context_rows,
                            judge=judge, backend=backend, case_id=case.case_id,
                        )
                    )
                scores.append(
                    score_correctness(
                        result.answer,
                        case.ground_truth_answer,
                        case.ground_truth_rows,
                        judge=judge,
                        backend=backend,
                        case_id=case.case_id,
                        question=case.question,
                    )
                )
            for judged in scores:
                if judged is None:
                    unscored.append(
                        {"case_id": case.case_id, "path": path.value,
                         "metric": "unknown", "reason": "judge could not score"}
                    )
                    continue
                entry["scores"][judged.metric.value] = {
                    "score": judged.score,
                    "rationale": judged.rationale,
                }
                sums.setdefault(path.value, {}).setdefault(judged.metric.value, []).append(
                    judged.score
                )
                distributions.setdefault(path.value, {}).setdefault(
                    judged.metric.value, _blank_distribution()
                )[str(judged.score)] += 1
            matrix.append(entry)

    means = {
        path: {metric: round(sum(values) / len(values), 4) for metric, values in metrics.items()}
        for path, metrics in sums.items()
    }
    return EvalReport(
        cases_total=len(ordered),
        judge=judge.value,
        means=means,
        distributions=distributions,
        matrix=matrix,
        unscored=unscored,
    )


# -- hermetic wiring -----------------------------------------------------------


@dataclass
class HermeticComparison:
    """Builds per-case runners over shared deps with the documented fault profile."""

    db: PlantDb
    registry: FunctionRegistry
    domains: list[SubAgentDomain]
    catalog: SchemaCatalog
    examples: list[ExampleEntry]
    audit_store: AuditStore
    jargon: list[JargonEntry] = field(default_factory=list)
    rates: ProfileRates = field(default_factory=ProfileRates)
    threshold: float = 0.8
    r_route: int = 2
    r_func: int = 3
    # Final per-session conversation states, for replay-integrity checks.
    live_states: dict[str, ConversationState] = field(default_factory=dict)

    def fc_runner(self) -> PathRunner:
        def run(case: EvalCase, index: int) -> PathResult:
            fc_plan, _ = hermetic_fault_plans(index, self.rates)
            backend = FaultInjectingBackend(RulesBackend(), fc_plan)
            orchestrator = Orchestrator(
                backend,
                self.registry,
                self.domains,
                self.db,
                self.audit_store,
                jargon=self.jargon,
                r_route=self.r_route,
                r_func=self.r_func,
            )
            state = ConversationState.new(f"eval-fc-{case.case_id}")
            outcome = orchestrator.handle_turn(state, case.question)
            self.live_states[state.session_id] = state
            context = EMPTY_RESULT
            if outcome.tool_trace:
                # Re-derive the last tool result for judging context.
                from ..toolkit import invoke

                last = outcome.tool_trace[-1]
                context = invoke(last.function, last.arguments, self.db, self.registry)
            return PathResult(
                answer=outcome.answer,
                context_rows=context,
                status=outcome.status.value,
                failed=False,
            )

        return run

    def nfc_runner(self) -> PathRunner:
        def run(case: EvalCase, index: int) -> PathResult:
            _, nfc_plan = hermetic_fault_plans(index, self.rates)
            backend = FaultInjectingBackend(RulesBackend(), nfc_plan)
            pipeline = Nl2SqlPipeline(
                self.db,
                backend,
                self.catalog,
                self.examples,
                self.audit_store,
                threshold=self.threshold,
            )
            from ..nl2sql import NL2SQL_PROMPT

            state = ConversationState.new(f"eval-nfc-{case.case_id}", system_prompt=NL2SQL_PROMPT)
            outcome = pipeline.run(state, case.question)
            self.live_states[state.session_id] = state
            return PathResult(
                answer=outcome.answer,
                context_rows=outcome.result if outcome.result is not None else EMPTY_RESULT,
                status=outcome.status.value,
                failed=False,
            )

        return run

    def runners(self) -> dict[PathKind, PathRunner]:
        return {
            PathKind.FUNCTION_CALLING: self.fc_runner(),
            PathKind.NL2SQL: self.nfc_runner(),
        }
