#!/usr/bin/env python3
"""Regenerate the golden evaluation suite from the seed-42 fixture.

Ground truths are computed with direct SQL against a freshly seeded database,
independent of either retrieval path, then phrased as clean reference answers.
Output is frozen into src/plantquery/data/golden_cases.jsonl.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from plantquery import plantdb

OUT = Path(__file__).resolve().parents[1] / "src" / "plantquery" / "data" / "golden_cases.jsonl"


def main() -> None:
    workdir = tempfile.mkdtemp()
    db = plantdb.init_schema(Path(workdir) / "plant.db")
    plantdb.seed_fixture(db, 42)

    def q(sql: str, bindings: list | None = None) -> plantdb.QueryResultSet:
        return plantdb.execute_parameterized(db, sql, bindings or [])

    def wo_count(tag: str) -> plantdb.QueryResultSet:
        return q(
            "SELECT COUNT(*) AS wo_count FROM work_order "
            "WHERE equip_id = ? OR equip_id LIKE '%-' || ?",
            [tag, tag],
        )

    def wrs_by(author: str) -> plantdb.QueryResultSet:
        return q(
            "SELECT wr_id, equip_id, description, entered_by, entered_date "
            "FROM work_request WHERE entered_by = ? ORDER BY entered_date, wr_id",
            [author],
        )

    def count_case(case_id: str, tag: str, tags: list[str]) -> dict:
        rows = wo_count(tag)
        n = rows.rows[0][0]
        return {
            "case_id": case_id,
            "question": f"how many work orders are filed against {tag}",
            "ground_truth_answer": f"There are {n} work orders against {tag}.",
            "ground_truth_rows": rows.to_dict(),
            "tags": ["count", *tags],
        }

    def wr_case(case_id: str, author: str, tags: list[str]) -> dict:
        rows = wrs_by(author)
        ids = ", ".join(r[0] for r in rows.rows)
        if rows.row_count:
            answer = f"{author} entered {rows.row_count} work requests: {ids}."
        else:
            answer = f"No work requests have been entered by {author}."
        return {
            "case_id": case_id,
            "question": f"Show me all the work requests entered in by {author}",
            "ground_truth_answer": answer,
            "ground_truth_rows": rows.to_dict() if rows.row_count else None,
            "tags": ["work-requests", *tags],
        }

    def stock_case(case_id: str, part: str, tags: list[str]) -> dict:
        rows = q(
            "SELECT part_number, catalogue_id, qty_on_hand, warehouse FROM stock "
            "WHERE part_number = ?",
            [part],
        )
        part_number, catalogue_id, qty, warehouse = rows.rows[0]
        return {
            "case_id": case_id,
            "question": f"How many units of part {part} are in stock?",
            "ground_truth_answer": (
                f"Part {part_number} has {qty} units on hand in warehouse {warehouse} "
                f"(catalogue {catalogue_id})."
            ),
            "ground_truth_rows": rows.to_dict(),
            "tags": ["stock", *tags],
        }

    cases = []

    cases.append(count_case("c00", "SG2", ["flagship"]))
    cases.append(wr_case("c01", "Maria Garcia", []))
    cases.append(wr_case("c02", "John Smith", ["flagship"]))
    cases.append(wr_case("c03", "Wei Chen", []))
    cases.append(stock_case("c04", "BRG-2205", ["flagship"]))
    cases.append(wr_case("c05", "James O'Brien", ["quoting"]))
    cases.append(stock_case("c06", "SEAL-310", []))

    info = q("SELECT equip_id, name, system_code, location FROM equipment WHERE equip_id = ?",
             ["056-SG2"])
    equip_id, name, system_code, location = info.rows[0]
    cases.append(
        {
            "case_id": "c07",
            "question": "Tell me about equipment 056-SG2",
            "ground_truth_answer": (
                f"Equipment {equip_id} is {name}, system {system_code}, located in {location}."
            ),
            "ground_truth_rows": info.to_dict(),
            "tags": ["equipment"],
        }
    )

    cases.append(count_case("c08", "035-CWP4", []))

    bom = q(
        "SELECT part_number, part_description, qty_per_assembly FROM bom_line "
        "WHERE equip_id = ? ORDER BY part_number",
        ["056-SG2"],
    )
    lines = ", ".join(f"{r[0]} ({r[1]}, qty {r[2]})" for r in bom.rows)
    cases.append(
        {
            "case_id": "c09",
            "question": "What parts are on the bill of materials for 056-SG2?",
            "ground_truth_answer": (
                f"The bill of materials for 056-SG2 has {bom.row_count} lines: {lines}."
            ),
            "ground_truth_rows": bom.to_dict(),
            "tags": ["bom"],
        }
    )

    cases.append(count_case("c10", "HX12", ["short-tag"]))

    hold = q(
        "SELECT wo_id, equip_id, status, description, entered_by, entered_date, priority "
        "FROM work_order WHERE status = 'HOLD' ORDER BY entered_date DESC, wo_id LIMIT 10"
    )
    hold_lines = ", ".join(
        f"{r[0]} ({r[1]}, {r[3]}, {r[4]}, {r[5]}, priority {r[6]})" for r in hold.rows
    )
    cases.append(
        {
            "case_id": "c11",
            "question": "list the work orders on hold",
            "ground_truth_answer": f"Found {hold.row_count} HOLD work orders: {hold_lines}.",
            "ground_truth_rows": hold.to_dict(),
            "tags": ["status"],
        }
    )

    cases.append(stock_case("c12", "VLV-120", []))
    cases.append(stock_case("c13", "FLT-050", []))
    cases.append(wr_case("c14", "Alex Morgan", ["no-data"]))

    info2 = q("SELECT equip_id, name, system_code, location FROM equipment WHERE equip_id = ?",
              ["764-CMP7"])
    e2 = info2.rows[0]
    cases.append(
        {
            "case_id": "c15",
            "question": "Where is equipment 764-CMP7 located?",
            "ground_truth_answer": (
                f"Equipment {e2[0]} is {e2[1]}, system {e2[2]}, located in {e2[3]}."
            ),
            "ground_truth_rows": info2.to_dict(),
            "tags": ["equipment"],
        }
    )

    cases.append(count_case("c16", "664-SG3", []))

    bom2 = q(
        "SELECT part_number, part_description, qty_per_assembly FROM bom_line "
        "WHERE equip_id = ? ORDER BY part_number",
        ["764-CMP7"],
    )
    lines2 = ", ".join(f"{r[0]} ({r[1]}, qty {r[2]})" for r in bom2.rows)
    cases.append(
        {
            "case_id": "c17",
            "question": "What parts are on the bill of materials for 764-CMP7?",
            "ground_truth_answer": (
                f"The bill of materials for 764-CMP7 has {bom2.row_count} lines: {lines2}."
            ),
            "ground_truth_rows": bom2.to_dict(),
            "tags": ["bom"],
        }
    )

    cases.append(wr_case("c18", "Priya Patel", []))
    cases.append(wr_case("c19", "Lars Nielsen", []))

    with OUT.open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case, sort_keys=True) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
