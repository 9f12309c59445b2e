"""Pre-approved function registry: the guardrail around all model-driven SQL.

Each registered function couples a SELECT-only SQL template with typed
parameter schemas, an explicit binding order, a human description carrying
jargon annotations, and a domain tag that groups functions under sub-agents.
Registration is the expert-review chokepoint; at invocation time the template
is re-checked against the registry whitelist before execution.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from . import plantdb
from .backends.base import ToolDescriptor
from .plantdb import PlantDb, QueryResultSet, count_placeholders
from .schemaguard import Dtype, ParamSchema


class Domain(Enum):
    WORK_ORDER = "WORK_ORDER"
    EQUIPMENT = "EQUIPMENT"
    MATERIALS = "MATERIALS"


MAX_FUNCTIONS_PER_DOMAIN = 20
WARN_FUNCTIONS_PER_DOMAIN = 15

_FN_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


class ToolkitError(Exception):
    """Registration or invocation failure."""


class UnknownFunctionError(ToolkitError):
    pass


@dataclass(frozen=True)
class JargonEntry:
    term: str
    expansion: str
    context_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.term:
            raise ValueError("jargon term must be non-empty")


@dataclass(frozen=True)
class RegisteredFunction:
    """A pre-approved SQL template with its declared parameter schemas."""

    name: str
    description: str
    params: tuple[ParamSchema, ...]
    sql_template: str
    binding_order: tuple[str, ...]
    domain: Domain
    jargon_terms: tuple[tuple[str, str], ...] = ()

    def validate_definition(self) -> None:
        if not _FN_NAME_RE.match(self.name):
            raise ToolkitError(f"invalid function name {self.name!r}")
        if not self.sql_template.strip().upper().startswith("SELECT"):
            raise ToolkitError(f"{self.name}: template must be a SELECT statement")
        placeholders = count_placeholders(self.sql_template)
        if placeholders != len(self.binding_order):
            raise ToolkitError(
                f"{self.name}: template has {placeholders} placeholders but binding order "
                f"declares {len(self.binding_order)}"
            )
        param_names = {p.name for p in self.params}
        if len(param_names) != len(self.params):
            raise ToolkitError(f"{self.name}: duplicate parameter names")
        for bound in self.binding_order:
            if bound not in param_names:
                raise ToolkitError(f"{self.name}: binding order names unknown param {bound!r}")


@dataclass(frozen=True)
class SubAgentDomain:
    domain: Domain
    system_prompt: str
    functions: tuple[str, ...]


class FunctionRegistry:
    """Write-at-startup function store; read-only afterwards."""

    def __init__(self) -> None:
        self._functions: dict[str, RegisteredFunction] = {}

    def register(self, fn: RegisteredFunction) -> None:
        fn.validate_definition()
        if fn.name in self._functions:
            raise ToolkitError(f"function {fn.name!r} already registered")
        per_domain = len(self.by_domain(fn.domain))
        if per_domain >= MAX_FUNCTIONS_PER_DOMAIN:
            raise ToolkitError(
                f"domain {fn.domain.value} is at its cap of {MAX_FUNCTIONS_PER_DOMAIN} functions"
            )
        if per_domain >= WARN_FUNCTIONS_PER_DOMAIN:
            warnings.warn(
                f"domain {fn.domain.value} now has {per_domain + 1} functions; "
                "model tool selection degrades as the list grows",
                stacklevel=2,
            )
        self._functions[fn.name] = fn

    def get(self, name: str) -> RegisteredFunction:
        try:
            return self._functions[name]
        except KeyError:
            raise UnknownFunctionError(f"no registered function named {name!r}") from None

    def names(self) -> set[str]:
        return set(self._functions)

    def templates(self) -> set[str]:
        return {fn.sql_template for fn in self._functions.values()}

    def by_domain(self, domain: Domain) -> list[RegisteredFunction]:
        return [fn for fn in self._functions.values() if fn.domain is domain]

    def all_functions(self) -> list[RegisteredFunction]:
        return list(self._functions.values())


def register(fn: RegisteredFunction, registry: FunctionRegistry) -> None:
    registry.register(fn)


def invoke(
    name: str,
    arguments: dict[str, Any],
    db: PlantDb,
    registry: FunctionRegistry,
) -> QueryResultSet:
    """Run a registered function with already-validated, coerced arguments.

    Bindings are assembled in declared order; absent optional parameters bind
    as NULL so templates can carry optional filters. Never builds SQL from
    argument text.
    """
    fn = registry.get(name)
    if fn.sql_template not in registry.templates():
        raise ToolkitError(f"{name}: template is not whitelisted")  # pragma: no cover
    bindings = [arguments.get(param) for param in fn.binding_order]
    try:
        return plantdb.execute_parameterized(db, fn.sql_template, bindings)
    except plantdb.PlantDbError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def tool_descriptor(fn: RegisteredFunction) -> ToolDescriptor:
    """Derive the model-facing descriptor, interpolating jargon definitions."""
    description = fn.description
    if fn.jargon_terms:
        notes = "; ".join(f"{term} means {definition}" for term, definition in fn.jargon_terms)
        description = f"{description} ({notes})"
    return ToolDescriptor(name=fn.name, description=description, parameters=fn.params)


def builtin_catalog() -> list[RegisteredFunction]:
    """The shipped function inventory covering the common maintenance queries."""
    return [
        RegisteredFunction(
            name="count_work_orders_by_equipment",
            description=(
                "Count work orders filed against one piece of equipment. Accepts a full "
                "equipment id like 056-SG2 or a short tag like SG2."
            ),
            params=(
                ParamSchema("equip_id", Dtype.STRING, description="equipment id or short tag"),
            ),
            sql_template=(
                "SELECT COUNT(*) AS wo_count FROM work_order "
                "WHERE equip_id = ? OR equip_id LIKE '%-' || ?"
            ),
            binding_order=("equip_id", "equip_id"),
            domain=Domain.WORK_ORDER,
            jargon_terms=(("WO", "work order"), ("SG", "steam generator equipment tag")),
        ),
        RegisteredFunction(
            name="list_work_orders_by_status",
            description="List work orders in a given status, most recent first.",
            params=(
                ParamSchema(
                    "status", Dtype.ENUM, enum_values=("OPEN", "CLOSED", "HOLD"),
                    description="work order status",
                ),
                ParamSchema("limit", Dtype.INTEGER, description="maximum rows to return"),
            ),
            sql_template=(
                "SELECT wo_id, equip_id, status, description, entered_by, entered_date, priority "
                "FROM work_order WHERE status = ? ORDER BY entered_date DESC, wo_id LIMIT ?"
            ),
            binding_order=("status", "limit"),
            domain=Domain.WORK_ORDER,
            jargon_terms=(("WO", "work order"),),
        ),
        RegisteredFunction(
            name="list_work_requests_by_author",
            description=(
                "List work requests entered by a named person, optionally bounded by an "
                "entered-date range."
            ),
            params=(
                ParamSchema("author", Dtype.STRING, description="person name as recorded"),
                ParamSchema(
                    "date_from", Dtype.DATE, required=False,
                    description="earliest entered date, YYYY-MM-DD",
                ),
                ParamSchema(
                    "date_to", Dtype.DATE, required=False,
                    description="latest entered date, YYYY-MM-DD",
                ),
            ),
            sql_template=(
                "SELECT wr_id, equip_id, description, entered_by, entered_date "
                "FROM work_request WHERE entered_by = ? "
                "AND (? IS NULL OR entered_date >= ?) AND (? IS NULL OR entered_date <= ?) "
                "ORDER BY entered_date, wr_id"
            ),
            binding_order=("author", "date_from", "date_from", "date_to", "date_to"),
            domain=Domain.WORK_ORDER,
            jargon_terms=(("WR", "work request"),),
        ),
        RegisteredFunction(
            name="get_equipment_info",
            description="Fetch the master record for one piece of equipment.",
            params=(
                ParamSchema("equip_id", Dtype.STRING, description="full equipment id, NNN-XXn"),
            ),
            sql_template=(
                "SELECT equip_id, name, system_code, location FROM equipment WHERE equip_id = ?"
            ),
            binding_order=("equip_id",),
            domain=Domain.EQUIPMENT,
            jargon_terms=(("SG", "steam generator equipment tag"),),
        ),
        RegisteredFunction(
            name="get_equipment_bom",
            description="List the bill of materials (component parts) for one equipment.",
            params=(
                ParamSchema("equip_id", Dtype.STRING, description="full equipment id, NNN-XXn"),
            ),
            sql_template=(
                "SELECT part_number, part_description, qty_per_assembly "
                "FROM bom_line WHERE equip_id = ? ORDER BY part_number"
            ),
            binding_order=("equip_id",),
            domain=Domain.EQUIPMENT,
            jargon_terms=(("BOM", "bill of materials"),),
        ),
        RegisteredFunction(
            name="get_stock_quantity",
            description="Look up on-hand stock for a part number.",
            params=(
                ParamSchema("part_number", Dtype.STRING, description="catalogued part number"),
            ),
            sql_template=(
                "SELECT part_number, catalogue_id, qty_on_hand, warehouse "
                "FROM stock WHERE part_number = ?"
            ),
            binding_order=("part_number",),
            domain=Domain.MATERIALS,
            jargon_terms=(("on hand", "physically available in the warehouse"),),
        ),
    ]


_DOMAIN_PROMPTS = {
    Domain.WORK_ORDER: (
        "You are the work-order assistant for plant maintenance data. Answer questions about "
        "work orders and work requests using only your tools. Report figures exactly as "
        "returned. If none of your tools fits the question, reply with exactly "
        "NO-MATCHING-FUNCTION."
    ),
    Domain.EQUIPMENT: (
        "You are the equipment assistant for plant maintenance data. Answer questions about "
        "equipment records and bills of material using only your tools. Report figures exactly "
        "as returned. If none of your tools fits the question, reply with exactly "
        "NO-MATCHING-FUNCTION."
    ),
    Domain.MATERIALS: (
        "You are the materials assistant for plant maintenance data. Answer questions about "
        "parts and stock levels using only your tools. Report figures exactly as returned. "
        "If none of your tools fits the question, reply with exactly NO-MATCHING-FUNCTION."
    ),
}


def default_registry() -> FunctionRegistry:
    registry = FunctionRegistry()
    for fn in builtin_catalog():
        registry.register(fn)
    return registry


def default_domains(registry: FunctionRegistry) -> list[SubAgentDomain]:
    out = []
    for domain in Domain:
        functions = tuple(fn.name for fn in registry.by_domain(domain))
        if functions:
            out.append(
                SubAgentDomain(
                    domain=domain,
                    system_prompt=_DOMAIN_PROMPTS[domain],
                    functions=functions,
                )
            )
    return out


def default_jargon() -> list[JargonEntry]:
    return [
        JargonEntry("WR", "Work Request"),
        JargonEntry("WO", "Work Order"),
        JargonEntry("BOM", "Bill of Materials"),
        JargonEntry("SG", "Steam Generator", context_hint="equipment tag"),
        JargonEntry("megger", "insulation-resistance test (from the Megger brand tester)"),
    ]


def expand_jargon(text: str, dictionary: list[JargonEntry]) -> str:
    """Append a Definitions block for dictionary terms found in the text.

    Matches whole words, tolerating a plural ``s`` (so ``WRs`` triggers the
    ``WR`` entry but ``WRIST`` does not). The original text is never altered,
    and definitions already present are not repeated, which makes the
    expansion idempotent on its own output.
    """
    lines = []
    for entry in dictionary:
        pattern = rf"\b{re.escape(entry.term)}s?\b"
        if not re.search(pattern, text):
            continue
        label = f"{entry.term} ({entry.context_hint})" if entry.context_hint else entry.term
        line = f"{label}: {entry.expansion}"
        if line not in text and line not in lines:
            lines.append(line)
    if not lines:
        return text
    return text + "\n\nDefinitions:\n" + "\n".join(lines)


# -- declarative registry file ------------------------------------------------


def function_to_config(fn: RegisteredFunction) -> dict[str, Any]:
    return {
        "name": fn.name,
        "description": fn.description,
        "domain": fn.domain.value,
        "sql_template": fn.sql_template,
        "binding_order": list(fn.binding_order),
        "params": [
            {
                "name": p.name,
                "dtype": p.dtype.name,
                "required": p.required,
                "enum_values": list(p.enum_values) if p.enum_values else None,
                "description": p.description,
            }
            for p in fn.params
        ],
        "jargon_terms": [list(pair) for pair in fn.jargon_terms],
    }


def function_from_config(payload: dict[str, Any]) -> RegisteredFunction:
    params = tuple(
        ParamSchema(
            name=p["name"],
            dtype=Dtype[p["dtype"]],
            required=p.get("required", True),
            enum_values=tuple(p["enum_values"]) if p.get("enum_values") else None,
            description=p.get("description", ""),
        )
        for p in payload.get("params", [])
    )
    return RegisteredFunction(
        name=payload["name"],
        description=payload.get("description", ""),
        params=params,
        sql_template=payload["sql_template"],
        binding_order=tuple(payload.get("binding_order", [])),
        domain=Domain(payload["domain"]),
        jargon_terms=tuple(tuple(pair) for pair in payload.get("jargon_terms", [])),
    )


def load_registry_file(path: str | Path) -> FunctionRegistry:
    """Build a registry from the reviewable JSON definition file."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    registry = FunctionRegistry()
    for item in payload["functions"]:
        registry.register(function_from_config(item))
    return registry


def dump_registry_file(registry: FunctionRegistry, path: str | Path) -> None:
    payload = {"functions": [function_to_config(fn) for fn in registry.all_functions()]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
