"""Embedded plant-maintenance database: schema, deterministic seeding, guarded execution.

All function-calling SQL flows through :func:`execute_parameterized`, which binds
values as data only. The baseline path uses :func:`execute_freeform`, restricted to
single SELECT statements as defense in depth.
"""

from __future__ import annotations

import json
import random
import re
import sqlite3
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Sequence


class PlantDbError(Exception):
    """Base error for database operations."""


class SetupError(PlantDbError):
    """Schema initialization failed (unwritable or unopenable storage)."""


class SeedError(PlantDbError):
    """Seeding refused or failed."""


class SqlError(PlantDbError):
    """SQL could not be executed (syntax error, unknown table/column, engine failure)."""


class BindingCountError(PlantDbError):
    """Number of bindings does not match the template's placeholder count."""


class NonSelectError(PlantDbError):
    """A statement other than a single SELECT was refused."""


@dataclass(frozen=True)
class QueryResultSet:
    """Tabular query result with column names."""

    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row arity does not match column count")

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
            "row_count": self.row_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "QueryResultSet":
        return cls(
            columns=tuple(payload["columns"]),
            rows=tuple(tuple(row) for row in payload["rows"]),
        )


EMPTY_RESULT = QueryResultSet(columns=(), rows=())


@dataclass(frozen=True)
class SeedSummary:
    """Row counts per table after seeding."""

    seed: int
    counts: dict[str, int]

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "counts": self.counts}, sort_keys=True)


TABLES = ("equipment", "work_order", "work_request", "bom_line", "stock")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS equipment (
    equip_id    TEXT PRIMARY KEY,
    name        TEXT NOT NULL,
    system_code TEXT NOT NULL,
    location    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS work_order (
    wo_id        TEXT PRIMARY KEY,
    equip_id     TEXT NOT NULL REFERENCES equipment(equip_id),
    status       TEXT NOT NULL CHECK (status IN ('OPEN', 'CLOSED', 'HOLD')),
    description  TEXT NOT NULL,
    entered_by   TEXT NOT NULL,
    entered_date TEXT NOT NULL,
    priority     INTEGER NOT NULL CHECK (priority BETWEEN 1 AND 5)
);
CREATE TABLE IF NOT EXISTS work_request (
    wr_id        TEXT PRIMARY KEY,
    equip_id     TEXT NOT NULL REFERENCES equipment(equip_id),
    description  TEXT NOT NULL,
    entered_by   TEXT NOT NULL,
    entered_date TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS bom_line (
    equip_id         TEXT NOT NULL REFERENCES equipment(equip_id),
    part_number      TEXT NOT NULL,
    part_description TEXT NOT NULL,
    qty_per_assembly INTEGER NOT NULL CHECK (qty_per_assembly >= 1),
    PRIMARY KEY (equip_id, part_number)
);
CREATE TABLE IF NOT EXISTS stock (
    part_number  TEXT PRIMARY KEY,
    catalogue_id TEXT NOT NULL,
    qty_on_hand  INTEGER NOT NULL CHECK (qty_on_hand >= 0),
    warehouse    TEXT NOT NULL
);
"""

_EQUIP_ID_RE = re.compile(r"^\d{3}-[A-Za-z0-9]+$")

# Single-quoted SQL literals; placeholders inside them are data, not parameters.
_SQL_STRING_RE = re.compile(r"'(?:[^']|'')*'")


class PlantDb:
    """Handle to the single-file database. Safe for concurrent readers."""

    def __init__(self, path: str | Path):
        self.path = str(path)

    @contextmanager
    def _connect(self, readonly: bool = False) -> Iterator[sqlite3.Connection]:
        if readonly:
            uri = f"file:{Path(self.path).resolve()}?mode=ro"
            conn = sqlite3.connect(uri, uri=True, timeout=30.0)
        else:
            conn = sqlite3.connect(self.path, timeout=30.0)
        try:
            conn.execute("PRAGMA foreign_keys = ON")
            yield conn
            conn.commit()
        except Exception:
            conn.rollback()
            raise
        finally:
            conn.close()

    def table_counts(self) -> dict[str, int]:
        """Row census across all tables, used by mutation-freedom checks."""
        with self._connect(readonly=True) as conn:
            return {
                t: conn.execute(f"SELECT COUNT(*) FROM {t}").fetchone()[0] for t in TABLES
            }

    def dump_content(self) -> str:
        """Canonical serialization of all rows, for determinism comparisons."""
        with self._connect(readonly=True) as conn:
            payload = {}
            for t in TABLES:
                cur = conn.execute(f"SELECT * FROM {t} ORDER BY 1, 2")
                payload[t] = [list(r) for r in cur.fetchall()]
        return json.dumps(payload, sort_keys=True)


def init_schema(storage_path: str | Path) -> PlantDb:
    """Create all five tables if absent. Idempotent on re-run."""
    db = PlantDb(storage_path)
    try:
        with db._connect() as conn:
            conn.executescript(_SCHEMA)
    except sqlite3.Error as exc:
        raise SetupError(f"cannot initialize database at {storage_path}: {exc}") from exc
    return db


_SYSTEMS = [
    ("SG", "STEAM GENERATOR"),
    ("CWP", "COOLING WATER PUMP"),
    ("MOV", "MOTOR OPERATED VALVE"),
    ("HX", "HEAT EXCHANGER"),
    ("CMP", "AIR COMPRESSOR"),
    ("FAN", "VENTILATION FAN"),
]
_LOCATIONS = [
    "TURBINE HALL",
    "REACTOR BUILDING",
    "PUMP HOUSE",
    "SWITCHYARD",
    "AUX BUILDING",
    "WAREHOUSE ANNEX",
]
_PEOPLE = [
    "John Smith",
    "Maria Garcia",
    "Wei Chen",
    "Priya Patel",
    "James O'Brien",
    "Fatima Al-Sayed",
    "Lars Nielsen",
]
_PARTS = [
    ("BRG-2205", "BALL BEARING 6205 SERIES"),
    ("BRG-6304", "ROLLER BEARING 6304"),
    ("SEAL-310", "MECHANICAL SEAL 310MM"),
    ("VLV-120", "GATE VALVE 120MM"),
    ("MTR-450", "ELECTRIC MOTOR 450KW"),
    ("GSK-077", "SPIRAL WOUND GASKET 77MM"),
    ("IMP-220", "PUMP IMPELLER 220MM"),
    ("FLT-050", "OIL FILTER CARTRIDGE"),
    ("CPL-180", "SHAFT COUPLING 180MM"),
    ("BLT-M24", "HEX BOLT M24 SET"),
    ("PLC-501", "PLC CONTROLLER MK501"),
    ("THR-090", "THRUST BEARING 90MM"),
]
_WO_TEMPLATES = [
    "REPLACE BALL BEARING ON DRIVE END",
    "MEGGER TEST MOTOR WINDINGS",
    "INSPECT SEAL FOR LEAKAGE",
    "LUBRICATE COUPLING AND CHECK ALIGNMENT",
    "CLEAR HIGH VIBRATION ALARM",
    "CALIBRATE PRESSURE TRANSMITTER",
    "TORQUE CHECK ON FLANGE BOLTS",
    "REPLACE OIL FILTER CARTRIDGE",
]
_WR_TEMPLATES = [
    "NOISE REPORTED DURING ROUNDS",
    "OIL WEEP OBSERVED AT BASEPLATE",
    "REQUEST INSPECTION AFTER TRIP",
    "TEMPERATURE READING ABOVE NORMAL",
    "REQUEST MEGGER TEST ON MOTOR",
]


def _iso_date(rng: random.Random) -> str:
    year = rng.choice([2024, 2025])
    month = rng.randint(1, 12)
    day = rng.randint(1, 28)
    return f"{year:04d}-{month:02d}-{day:02d}"


def seed_fixture(db: PlantDb, seed: int, force: bool = False) -> SeedSummary:
    """Populate the database with deterministic synthetic content.

    The fixture always contains equipment ``056-SG2``, work requests entered by
    John Smith, and at least one equipment whose bill of materials includes a
    bearing part that is present in stock.
    """
    counts = db.table_counts()
    if any(counts.values()):
        if not force:
            raise SeedError("database is not empty; pass force=True to reseed")
        with db._connect() as conn:
            for t in reversed(TABLES):
                conn.execute(f"DELETE FROM {t}")

    rng = random.Random(seed)

    equipment: list[tuple[str, str, str, str]] = [
        ("056-SG2", "STEAM GENERATOR 2", "SG", "REACTOR BUILDING"),
    ]
    used_nums = {56}
    for i in range(11):
        code, base_name = _SYSTEMS[i % len(_SYSTEMS)]
        num = rng.randint(10, 999)
        while num in used_nums:
            num = rng.randint(10, 999)
        used_nums.add(num)
        # Globally unique unit numbers keep short tags like SG2 unambiguous.
        unit = i + 3
        equip_id = f"{num:03d}-{code}{unit}"
        equipment.append((equip_id, f"{base_name} {unit}", code, rng.choice(_LOCATIONS)))
    equip_ids = [e[0] for e in equipment]

    work_orders = []
    for i in range(60):
        equip = "056-SG2" if i < 4 else rng.choice(equip_ids)
        work_orders.append(
            (
                f"WO-{10000 + i}",
                equip,
                rng.choice(["OPEN"] * 5 + ["CLOSED"] * 4 + ["HOLD"]),
                rng.choice(_WO_TEMPLATES),
                rng.choice(_PEOPLE),
                _iso_date(rng),
                rng.randint(1, 5),
            )
        )

    work_requests = []
    for i in range(25):
        author = "John Smith" if i < 3 else rng.choice(_PEOPLE)
        equip = "056-SG2" if i == 0 else rng.choice(equip_ids)
        work_requests.append(
            (f"WR-{9000 + i}", equip, rng.choice(_WR_TEMPLATES), author, _iso_date(rng))
        )

    bom_lines = []
    for equip_id, _, _, _ in equipment:
        if equip_id == "056-SG2":
            chosen = [_PARTS[0], _PARTS[2], _PARTS[5]]  # guaranteed bearing line
        else:
            chosen = rng.sample(_PARTS, rng.randint(2, 5))
        for part_number, part_description in chosen:
            bom_lines.append((equip_id, part_number, part_description, rng.randint(1, 8)))

    stock_rows = []
    for j, (part_number, _) in enumerate(_PARTS):
        qty = rng.randint(0, 400)
        if part_number == "BRG-2205":
            qty = max(qty, 12)
        stock_rows.append((part_number, f"CAT-{19000 + j}", qty, rng.choice(["W1", "W2", "W3"])))

    try:
        with db._connect() as conn:
            conn.executemany("INSERT INTO equipment VALUES (?, ?, ?, ?)", equipment)
            conn.executemany(
                "INSERT INTO work_order VALUES (?, ?, ?, ?, ?, ?, ?)", work_orders
            )
            conn.executemany("INSERT INTO work_request VALUES (?, ?, ?, ?, ?)", work_requests)
            conn.executemany("INSERT INTO bom_line VALUES (?, ?, ?, ?)", bom_lines)
            conn.executemany("INSERT INTO stock VALUES (?, ?, ?, ?)", stock_rows)
    except sqlite3.Error as exc:
        raise SeedError(f"seeding failed: {exc}") from exc

    return SeedSummary(seed=seed, counts=db.table_counts())


def count_placeholders(sql_template: str) -> int:
    """Positional ``?`` placeholders outside string literals."""
    return _SQL_STRING_RE.sub("", sql_template).count("?")


def execute_parameterized(
    db: PlantDb, sql_template: str, bindings: Sequence[Any]
) -> QueryResultSet:
    """Run a template with positional placeholders; bindings are passed as data only."""
    expected = count_placeholders(sql_template)
    if expected != len(bindings):
        raise BindingCountError(
            f"template has {expected} placeholders but {len(bindings)} bindings were given"
        )
    try:
        with db._connect(readonly=True) as conn:
            cur = conn.execute(sql_template, tuple(bindings))
            columns = tuple(d[0] for d in cur.description) if cur.description else ()
            rows = tuple(tuple(r) for r in cur.fetchall())
    except sqlite3.Error as exc:
        raise SqlError(str(exc)) from exc
    return QueryResultSet(columns=columns, rows=rows)


def _strip_literals(sql: str) -> str:
    return _SQL_STRING_RE.sub("''", sql)


def execute_freeform(db: PlantDb, sql: str) -> QueryResultSet:
    """Run a single free-form SELECT statement (baseline path only)."""
    stripped = sql.strip().rstrip(";").strip()
    if not stripped.upper().startswith("SELECT"):
        raise NonSelectError("only SELECT statements are allowed")
    if ";" in _strip_literals(stripped):
        raise NonSelectError("multiple statements are not allowed")
    try:
        with db._connect(readonly=True) as conn:
            cur = conn.execute(stripped)
            columns = tuple(d[0] for d in cur.description) if cur.description else ()
            rows = tuple(tuple(r) for r in cur.fetchall())
    except sqlite3.Error as exc:
        raise SqlError(str(exc)) from exc
    return QueryResultSet(columns=columns, rows=rows)


def check_referential_integrity(db: PlantDb) -> list[str]:
    """Full-scan foreign-key check; returns human-readable violations."""
    problems = []
    with db._connect(readonly=True) as conn:
        known = {r[0] for r in conn.execute("SELECT equip_id FROM equipment")}
        for table in ("work_order", "work_request", "bom_line"):
            for (equip_id,) in conn.execute(f"SELECT equip_id FROM {table}"):
                if equip_id not in known:
                    problems.append(f"{table} references unknown equipment {equip_id}")
        for (equip_id,) in conn.execute("SELECT equip_id FROM equipment"):
            if not _EQUIP_ID_RE.match(equip_id):
                problems.append(f"equipment id {equip_id} violates NNN-XXn format")
    return problems
