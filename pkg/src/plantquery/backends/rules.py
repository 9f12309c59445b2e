"""Deterministic keyword backend: a small rule table standing in for a model.

Routes by query substrings and extracts arguments by regex, so the whole
orchestration stack runs offline with reproducible outputs. The same instance
serves every agent role; it infers the role it is playing from the tools it
is offered (routing descriptors, registered functions, or structured-record
tools) and from the trailing conversation state.
"""

from __future__ import annotations

import json
import re
from typing import Any, Sequence

from ..schemaguard import ToolCallEnvelope
from .base import (
    BackendResponse,
    ChatMessage,
    Role,
    ToolDescriptor,
    check_call_preconditions,
)

ROUTE_TOOL_PREFIX = "route_"

# Sub-agents reply with this token when none of their tools fits the query;
# the router treats it as an inappropriate response and tries another domain.
NO_CAPABILITY_SENTINEL = "NO-MATCHING-FUNCTION"

_EQUIP_FULL_RE = re.compile(r"\b(\d{3}-[A-Za-z][A-Za-z0-9]*)\b")
_EQUIP_TAG_RE = re.compile(r"\b([A-Z]{1,4}\d+[A-Z]?)\b")
_PERSON_RE = re.compile(r"\bby\s+([A-Z][a-zA-Z'-]+(?:\s+[A-Z][a-zA-Z'-]+)+)")
_PART_RE = re.compile(r"\b((?!WO-|WR-)[A-Z]{2,5}-[A-Z0-9]{2,8})\b")
_DATE_RE = re.compile(r"\b(\d{4}-\d{2}-\d{2})\b")
_STATUS_RE = re.compile(r"\b(open|closed|hold)\b", re.IGNORECASE)
_LIMIT_RE = re.compile(r"\b(?:top|first|limit)\s+(\d+)\b", re.IGNORECASE)

_COUNT_WORDS = ("how many", "count", "number of")
_WR_WORDS = ("work request", "work requests", "wr", "wrs")
_WO_WORDS = ("work order", "work orders", "wo", "wos")
_BOM_WORDS = ("bill of material", "bill of materials", "bom", "parts list")
_STOCK_WORDS = ("in stock", "stock", "on hand", "warehouse", "quantity of part")
_EQUIP_INFO_WORDS = ("equipment", "asset", "tell me about", "where is", "what is")
_FORMAT_WORDS = ("table", "tabulate", "format", "sort", "bullet", "list them", "csv")


def _has_phrase(text: str, phrase: str) -> bool:
    return re.search(rf"\b{re.escape(phrase)}\b", text, re.IGNORECASE) is not None


def _has_any(text: str, phrases: Sequence[str]) -> bool:
    return any(_has_phrase(text, p) for p in phrases)


def last_user_text(messages: Sequence[ChatMessage]) -> str:
    for message in reversed(messages):
        if message.role is Role.USER:
            return message.content
    return ""


def last_tool_payload(messages: Sequence[ChatMessage]) -> dict[str, Any] | None:
    for message in reversed(messages):
        if message.role is Role.TOOL:
            try:
                payload = json.loads(message.content)
            except json.JSONDecodeError:
                return None
            return payload if isinstance(payload, dict) else None
    return None


def wants_formatting_followup(messages: Sequence[ChatMessage], user_text: str) -> bool:
    """True when the turn only reshapes data already present in the history."""
    if last_tool_payload(messages) is None:
        return False
    if _EQUIP_FULL_RE.search(user_text) or _PERSON_RE.search(user_text):
        return False
    return _has_any(user_text, _FORMAT_WORDS)


def _extract_equipment(text: str) -> str | None:
    match = _EQUIP_FULL_RE.search(text)
    if match:
        return match.group(1)
    match = _EQUIP_TAG_RE.search(text)
    if match:
        return match.group(1)
    return None


def _extract_person(text: str) -> str | None:
    match = _PERSON_RE.search(text)
    return match.group(1) if match else None


def _extract_part(text: str) -> str | None:
    match = _PART_RE.search(text)
    return match.group(1) if match else None


def _render_rows(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    rendered = []
    for row in rows:
        rendered.append(", ".join(f"{c}={v}" for c, v in zip(columns, row)))
    return "; ".join(rendered)


def render_markdown_table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    header = "| " + " | ".join(columns) + " |"
    rule = "| " + " | ".join("---" for _ in columns) + " |"
    body = ["| " + " | ".join(str(v) for v in row) + " |" for row in rows]
    return "\n".join([header, rule, *body])


class RulesBackend:
    """Keyword router plus regex argument extraction; fully offline."""

    def __init__(self, config: Any = None):
        self.config = config
        self._call_seq = 0

    def _next_call_id(self) -> str:
        self._call_seq += 1
        return f"call_{self._call_seq}"

    def complete(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolDescriptor]
    ) -> BackendResponse:
        check_call_preconditions(messages)
        names = {t.name for t in tools}
        user = last_user_text(messages)
        if "record_intent" in names:
            return self._intent(user)
        if "draft_sql" in names:
            return self._draft(user)
        if "record_score" in names:
            return self._score()
        if names and all(n.startswith(ROUTE_TOOL_PREFIX) for n in names):
            return self._main_agent(messages, names, user)
        if names:
            return self._sub_agent(messages, names, user)
        return self._plain_text(messages, user)

    # -- main agent -------------------------------------------------------

    def _route_candidates(self, text: str) -> list[str]:
        candidates: list[str] = []
        if _has_any(text, _WO_WORDS) or _has_any(text, _WR_WORDS):
            candidates.append("work_order")
        if _has_any(text, _STOCK_WORDS):
            candidates.append("materials")
        if _has_any(text, _BOM_WORDS) or _has_any(text, _EQUIP_INFO_WORDS):
            candidates.append("equipment")
        return candidates

    def _main_agent(
        self, messages: Sequence[ChatMessage], names: set[str], user: str
    ) -> BackendResponse:
        if wants_formatting_followup(messages, user):
            payload = last_tool_payload(messages)
            assert payload is not None
            table = render_markdown_table(payload.get("columns", []), payload.get("rows", []))
            return BackendResponse.from_text("Here is that data as a table:\n\n" + table)
        for domain in self._route_candidates(user):
            tool = ROUTE_TOOL_PREFIX + domain
            if tool in names:
                return BackendResponse.from_tool_call(
                    ToolCallEnvelope(
                        tool_name=tool, arguments={"query": user}, call_id=self._next_call_id()
                    )
                )
        return BackendResponse.from_text(self._direct_answer(user))

    def _direct_answer(self, user: str) -> str:
        if _has_any(user, ("functions", "what can you", "capabilities", "help")):
            return (
                "I can retrieve plant maintenance data: work orders and work requests, "
                "equipment details and bills of material, and parts stock levels."
            )
        if _has_any(user, ("day", "date", "today", "time")):
            return (
                "I don't have live calendar access, so I can't tell you today's date. "
                "I can help with plant maintenance data questions."
            )
        return (
            "I'm the plant-maintenance data assistant. Ask me about work orders, "
            "work requests, equipment, bills of material, or parts stock."
        )

    # -- sub agents -------------------------------------------------------

    def _sub_agent(
        self, messages: Sequence[ChatMessage], names: set[str], user: str
    ) -> BackendResponse:
        if messages and messages[-1].role is Role.TOOL:
            return BackendResponse.from_text(self._answer_from_tool_result(messages))
        pick = self._pick_function(names, user)
        if pick is None:
            return BackendResponse.from_text(NO_CAPABILITY_SENTINEL)
        name, arguments = pick
        return BackendResponse.from_tool_call(
            ToolCallEnvelope(tool_name=name, arguments=arguments, call_id=self._next_call_id())
        )

    def _pick_function(self, names: set[str], user: str) -> tuple[str, dict[str, Any]] | None:
        equip = _extract_equipment(user)
        person = _extract_person(user)
        part = _extract_part(user)
        dates = _DATE_RE.findall(user)
        counting = any(p in user.lower() for p in _COUNT_WORDS)

        if (
            "count_work_orders_by_equipment" in names
            and counting
            and _has_any(user, _WO_WORDS)
            and equip
        ):
            return "count_work_orders_by_equipment", {"equip_id": equip}
        if "list_work_requests_by_author" in names and _has_any(user, _WR_WORDS) and person:
            args: dict[str, Any] = {"author": person}
            if len(dates) >= 1:
                args["date_from"] = dates[0]
            if len(dates) >= 2:
                args["date_to"] = dates[1]
            return "list_work_requests_by_author", args
        status = _STATUS_RE.search(user)
        if "list_work_orders_by_status" in names and status and _has_any(user, _WO_WORDS):
            limit = _LIMIT_RE.search(user)
            return (
                "list_work_orders_by_status",
                {"status": status.group(1).upper(), "limit": int(limit.group(1)) if limit else 10},
            )
        if "get_stock_quantity" in names and _has_any(user, _STOCK_WORDS) and part:
            return "get_stock_quantity", {"part_number": part}
        if "get_equipment_bom" in names and _has_any(user, _BOM_WORDS) and equip:
            return "get_equipment_bom", {"equip_id": equip}
        if "get_equipment_info" in names and _has_any(user, _EQUIP_INFO_WORDS) and equip:
            return "get_equipment_info", {"equip_id": equip}
        return None

    def _answer_from_tool_result(self, messages: Sequence[ChatMessage]) -> str:
        payload = last_tool_payload(messages)
        if payload is None:
            return "I could not read the tool result."
        function = payload.get("function", "")
        arguments = payload.get("arguments", {})
        columns = payload.get("columns", [])
        rows = payload.get("rows", [])
        row_count = payload.get("row_count", len(rows))

        if function == "count_work_orders_by_equipment" and rows:
            return f"There are {rows[0][0]} work orders against {arguments.get('equip_id')}."
        if row_count == 0:
            return "No matching records were found for this query."
        if function == "get_stock_quantity":
            by_col = dict(zip(columns, rows[0]))
            return (
                f"Part {by_col.get('part_number')} has {by_col.get('qty_on_hand')} units on hand "
                f"in warehouse {by_col.get('warehouse')} (catalogue {by_col.get('catalogue_id')})."
            )
        if function == "get_equipment_info":
            by_col = dict(zip(columns, rows[0]))
            return (
                f"Equipment {by_col.get('equip_id')} is {by_col.get('name')}, "
                f"system {by_col.get('system_code')}, located in {by_col.get('location')}."
            )
        if function == "list_work_requests_by_author":
            author = arguments.get("author", "that author")
            return f"{author} entered {row_count} work requests: {_render_rows(columns, rows)}."
        if function == "get_equipment_bom":
            equip = arguments.get("equip_id", "that equipment")
            return f"Bill of materials for {equip} ({row_count} lines): {_render_rows(columns, rows)}."
        if function == "list_work_orders_by_status":
            status = arguments.get("status", "")
            return f"Found {row_count} {status} work orders: {_render_rows(columns, rows)}."
        return f"Found {row_count} records: {_render_rows(columns, rows)}."

    # -- structured-record tools -----------------------------------------

    def _intent(self, user: str) -> BackendResponse:
        equip = _extract_equipment(user)
        person = _extract_person(user)
        part = _extract_part(user)
        dates = _DATE_RE.findall(user)
        status = _STATUS_RE.search(user)
        counting = any(p in user.lower() for p in _COUNT_WORDS)

        arguments: dict[str, Any] = {}
        table = None
        if _has_any(user, _WR_WORDS):
            table = "work_request"
            summary = "work requests by person" if person else "work requests for equipment"
        elif _has_any(user, _WO_WORDS):
            table = "work_order"
            if status:
                summary = "work orders with status"
            elif counting:
                summary = "count work orders against equipment"
            else:
                summary = "work orders for equipment"
        elif _has_any(user, _STOCK_WORDS):
            table = "stock"
            summary = "stock quantity for part"
        elif _has_any(user, _BOM_WORDS):
            table = "bom_line"
            summary = "bill of materials for equipment"
        elif _has_any(user, _EQUIP_INFO_WORDS):
            table = "equipment"
            summary = "equipment information"
        else:
            summary = "general conversation"

        if table:
            arguments["table_name"] = table
        if person:
            arguments["person"] = person
        if equip:
            arguments["equipment"] = equip
        if part:
            arguments["condition_value"] = part
        elif status:
            arguments["condition_value"] = status.group(1).upper()
        if dates:
            arguments["date_value"] = dates[0]

        entity_count = len(arguments) - (1 if table else 0)
        confidence = 0.1 if not arguments else min(0.95, 0.4 + 0.15 * entity_count)
        arguments["intent_summary"] = summary
        arguments["confidence"] = round(confidence, 2)
        return BackendResponse.from_tool_call(
            ToolCallEnvelope(
                tool_name="record_intent", arguments=arguments, call_id=self._next_call_id()
            )
        )

    def _draft(self, user: str) -> BackendResponse:
        equip = _extract_equipment(user)
        person = _extract_person(user)
        part = _extract_part(user)
        status = _STATUS_RE.search(user)
        counting = any(p in user.lower() for p in _COUNT_WORDS)
        if person:
            person = person.replace("'", "''")

        if _has_any(user, _WR_WORDS) and person:
            sql = (
                "SELECT wr_id, equip_id, description, entered_by, entered_date "
                f"FROM work_request WHERE entered_by = '{person}'"
            )
            topic = "work requests by author"
        elif _has_any(user, _WO_WORDS) and status:
            sql = (
                "SELECT wo_id, equip_id, description, status FROM work_order "
                f"WHERE status = '{status.group(1).upper()}'"
            )
            topic = "work orders by status"
        elif _has_any(user, _WO_WORDS) and counting and equip:
            sql = f"SELECT COUNT(*) AS wo_count FROM work_order WHERE equip_id = '{equip}'"
            topic = "work order count for equipment"
        elif _has_any(user, _WO_WORDS) and equip:
            sql = (
                "SELECT wo_id, status, description, entered_by, entered_date "
                f"FROM work_order WHERE equip_id = '{equip}' ORDER BY entered_date, wo_id"
            )
            topic = "work orders for equipment"
        elif _has_any(user, _STOCK_WORDS) and part:
            sql = (
                "SELECT part_number, qty_on_hand, warehouse FROM stock "
                f"WHERE part_number = '{part}'"
            )
            topic = "stock level for part"
        elif _has_any(user, _BOM_WORDS) and equip:
            sql = (
                "SELECT part_number, part_description, qty_per_assembly FROM bom_line "
                f"WHERE equip_id = '{equip}'"
            )
            topic = "bill of materials for equipment"
        elif equip:
            sql = (
                "SELECT equip_id, name, system_code, location FROM equipment "
                f"WHERE equip_id = '{equip}'"
            )
            topic = "equipment details"
        else:
            sql = "SELECT equip_id, name, system_code, location FROM equipment"
            topic = "equipment listing"
        return BackendResponse.from_tool_call(
            ToolCallEnvelope(
                tool_name="draft_sql",
                arguments={"sql": sql, "explanation": f"drafted from schema knowledge: {topic}"},
                call_id=self._next_call_id(),
            )
        )

    def _score(self) -> BackendResponse:
        return BackendResponse.from_tool_call(
            ToolCallEnvelope(
                tool_name="record_score",
                arguments={"score": 4, "rationale": "rule-based heuristic score"},
                call_id=self._next_call_id(),
            )
        )

    # -- plain text -------------------------------------------------------

    def _plain_text(self, messages: Sequence[ChatMessage], user: str) -> BackendResponse:
        try:
            payload = json.loads(user)
        except json.JSONDecodeError:
            payload = None
        if isinstance(payload, dict) and "question" in payload:
            rows = payload.get("rows", [])
            columns = payload.get("columns", [])
            if not rows:
                return BackendResponse.from_text(
                    "No data was found for this question, so I cannot give a figure."
                )
            if len(rows) == 1 and len(rows[0]) == 1:
                return BackendResponse.from_text(f"The result is {rows[0][0]}.")
            return BackendResponse.from_text(
                f"Found {len(rows)} records: {_render_rows(columns, rows)}."
            )
        return BackendResponse.from_text(self._direct_answer(user))
