"""Evaluation harness: metric judging and the two-path comparison."""

from .comparison import (
    EvalCase,
    EvalReport,
    HermeticComparison,
    PathResult,
    load_cases_file,
    run_comparison,
)
from .judges import JudgedScore, JudgeKind, Metric, judge_metric, score_correctness
from .profiles import FaultInjectingBackend, FaultPlan, ProfileRates, hermetic_fault_plans

__all__ = [
    "EvalCase",
    "EvalReport",
    "FaultInjectingBackend",
    "FaultPlan",
    "HermeticComparison",
    "JudgeKind",
    "JudgedScore",
    "Metric",
    "PathResult",
    "ProfileRates",
    "hermetic_fault_plans",
    "judge_metric",
    "load_cases_file",
    "run_comparison",
    "score_correctness",
]
