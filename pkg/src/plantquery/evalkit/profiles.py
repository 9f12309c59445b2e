"""Deterministic fault profiles for hermetic comparisons.

The injector wraps a live backend and corrupts selected responses at the
model boundary, emulating the failure modes each path exhibits in practice:
the baseline misreads entities or drafts SQL with wrong identifiers, the
function-calling path occasionally routes to the wrong domain first and has
to recover. Which cases receive which fault is a pure function of the case's
position, so whole runs replay byte-identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

from ..backends import Backend, BackendResponse, ChatMessage, ResponseKind, ToolDescriptor
from ..backends.rules import ROUTE_TOOL_PREFIX
from ..schemaguard import ToolCallEnvelope


@dataclass(frozen=True)
class FaultPlan:
    """Faults to inject for one case on one path."""

    wrong_route_first: bool = False
    corrupt_entities: bool = False
    force_generated: bool = False
    corrupt_draft_field: bool = False
    near_miss_table: bool = False

    @property
    def any(self) -> bool:
        return (
            self.wrong_route_first
            or self.corrupt_entities
            or self.force_generated
            or self.corrupt_draft_field
            or self.near_miss_table
        )


@dataclass(frozen=True)
class ProfileRates:
    """Fault cadence by case position; periods of 0 disable a fault class."""

    fc_wrong_route_period: int = 7
    fc_wrong_route_offset: int = 3
    nfc_bad_field_period: int = 5
    nfc_bad_field_offset: int = 1
    nfc_wrong_value_period: int = 5
    nfc_wrong_value_offset: int = 3
    nfc_near_miss_period: int = 7
    nfc_near_miss_offset: int = 5


def _hits(index: int, period: int, offset: int) -> bool:
    return period > 0 and index % period == offset


def hermetic_fault_plans(index: int, rates: ProfileRates) -> tuple[FaultPlan, FaultPlan]:
    """(function-calling plan, baseline plan) for the case at this position."""
    fc = FaultPlan(
        wrong_route_first=_hits(index, rates.fc_wrong_route_period, rates.fc_wrong_route_offset)
    )
    if _hits(index, rates.nfc_bad_field_period, rates.nfc_bad_field_offset):
        nfc = FaultPlan(force_generated=True, corrupt_draft_field=True)
    elif _hits(index, rates.nfc_wrong_value_period, rates.nfc_wrong_value_offset):
        nfc = FaultPlan(corrupt_entities=True)
    elif _hits(index, rates.nfc_near_miss_period, rates.nfc_near_miss_offset):
        nfc = FaultPlan(force_generated=True, near_miss_table=True)
    else:
        nfc = FaultPlan()
    return fc, nfc


def _mangle(value: str) -> str:
    if value and value[-1] != "Z":
        return value[:-1] + "Z"
    return value + "Z"


# Replacements whose targets are beyond edit distance 2 from every real field,
# so the draft validator must reject rather than silently fix.
_BAD_FIELD_SWAPS = (
    ("entered_by", "originator"),
    ("qty_on_hand", "qty_available"),
    ("status", "status_flag"),
    ("equip_id", "equipment_code"),
)

# One-edit table misspellings the validator is expected to repair.
_NEAR_MISS_SWAPS = (
    ("work_request", "work_requests"),
    ("work_order", "work_orders"),
    ("bom_line", "bom_lines"),
    ("stock", "stocks"),
)


def _swap_first(sql: str, swaps: Sequence[tuple[str, str]]) -> str:
    for target, replacement in swaps:
        if re.search(rf"\b{target}\b", sql):
            return re.sub(rf"\b{target}\b", replacement, sql, count=1)
    return sql


class FaultInjectingBackend:
    """Wraps a backend and rewrites selected responses per the fault plan."""

    def __init__(self, inner: Backend, plan: FaultPlan):
        self.inner = inner
        self.plan = plan
        self._route_armed = plan.wrong_route_first

    def complete(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolDescriptor]
    ) -> BackendResponse:
        response = self.inner.complete(messages, tools)
        if response.kind is not ResponseKind.TOOL_CALL:
            return response
        envelope = response.tool_call
        assert envelope is not None

        if self._route_armed and envelope.tool_name.startswith(ROUTE_TOOL_PREFIX):
            self._route_armed = False
            offered = sorted(t.name for t in tools if t.name != envelope.tool_name)
            if offered:
                return BackendResponse.from_tool_call(
                    ToolCallEnvelope(
                        tool_name=offered[0],
                        arguments=dict(envelope.arguments),
                        call_id=envelope.call_id,
                    )
                )

        if envelope.tool_name == "record_intent" and (
            self.plan.corrupt_entities or self.plan.force_generated
        ):
            arguments = dict(envelope.arguments)
            if self.plan.force_generated:
                arguments["intent_summary"] = "unrecognized legacy report request"
            if self.plan.corrupt_entities:
                for key in ("person", "equipment", "condition_value"):
                    if arguments.get(key):
                        arguments[key] = _mangle(str(arguments[key]))
                        break
            return BackendResponse.from_tool_call(replace(envelope, arguments=arguments))

        if envelope.tool_name == "draft_sql" and (
            self.plan.corrupt_draft_field or self.plan.near_miss_table
        ):
            arguments = dict(envelope.arguments)
            sql = str(arguments.get("sql", ""))
            if self.plan.corrupt_draft_field:
                sql = _swap_first(sql, _BAD_FIELD_SWAPS)
            if self.plan.near_miss_table:
                sql = _swap_first(sql, _NEAR_MISS_SWAPS)
            arguments["sql"] = sql
            return BackendResponse.from_tool_call(replace(envelope, arguments=arguments))

        return response
