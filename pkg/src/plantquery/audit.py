"""Append-only audit store: every step of every turn, persisted in SQL.

Records carry JSON payloads (schema-versioned with a ``v`` field). Message-
bearing payloads allow a session's transcript to be reconstructed exactly,
which is how the history-integrity and guardrail properties are verified
after the fact.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from .backends.base import ChatMessage


class StepKind(Enum):
    USER_QUERY = "USER_QUERY"
    ROUTE = "ROUTE"
    TOOL_CALL = "TOOL_CALL"
    TOOL_RESULT = "TOOL_RESULT"
    VALIDATION_FAIL = "VALIDATION_FAIL"
    RETRY = "RETRY"
    SQL_EXECUTED = "SQL_EXECUTED"
    ANSWER = "ANSWER"
    FAULT = "FAULT"


class PathKind(Enum):
    FUNCTION_CALLING = "FUNCTION_CALLING"
    NL2SQL = "NL2SQL"


class AuditError(Exception):
    """Audit storage failure; callers must not let it abort the user's turn."""


class MissingSessionError(AuditError):
    pass


@dataclass(frozen=True)
class AuditRecord:
    record_id: int
    session_id: str
    turn: int
    timestamp: str
    step_kind: StepKind
    payload: dict[str, Any]
    path: PathKind

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "session_id": self.session_id,
            "turn": self.turn,
            "timestamp": self.timestamp,
            "step_kind": self.step_kind.value,
            "payload": self.payload,
            "path": self.path.value,
        }


_SCHEMA = """
CREATE TABLE IF NOT EXISTS audit_record (
    record_id  INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id TEXT NOT NULL,
    turn       INTEGER NOT NULL,
    timestamp  TEXT NOT NULL,
    step_kind  TEXT NOT NULL,
    payload    TEXT NOT NULL,
    path       TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_audit_session ON audit_record (session_id, record_id);
"""


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class AuditStore:
    """Durable append-only record store; appends are thread-safe."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._lock = threading.Lock()
        try:
            parent = Path(self.path).parent
            if parent and not parent.exists():
                parent.mkdir(parents=True, exist_ok=True)
            with self._connect() as conn:
                conn.executescript(_SCHEMA)
        except (OSError, sqlite3.Error) as exc:
            raise AuditError(f"cannot initialize audit store at {path}: {exc}") from exc

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path, timeout=30.0)

    def append(
        self,
        session_id: str,
        turn: int,
        step_kind: StepKind,
        payload: dict[str, Any],
        path: PathKind,
    ) -> int:
        """Persist one record; durable before return. Returns the record id."""
        body = dict(payload)
        body.setdefault("v", 1)
        with self._lock:
            try:
                conn = self._connect()
                try:
                    cur = conn.execute(
                        "INSERT INTO audit_record (session_id, turn, timestamp, step_kind, payload, path) "
                        "VALUES (?, ?, ?, ?, ?, ?)",
                        (
                            session_id,
                            turn,
                            _utc_now(),
                            step_kind.value,
                            json.dumps(body, sort_keys=True),
                            path.value,
                        ),
                    )
                    conn.commit()
                    return int(cur.lastrowid)
                finally:
                    conn.close()
            except sqlite3.Error as exc:
                raise AuditError(f"audit append failed: {exc}") from exc

    def query_records(
        self,
        session_id: str | None = None,
        step_kind: StepKind | None = None,
        path: PathKind | None = None,
    ) -> list[AuditRecord]:
        """Matching records in record_id order; an empty result is valid."""
        clauses, args = [], []
        if session_id is not None:
            clauses.append("session_id = ?")
            args.append(session_id)
        if step_kind is not None:
            clauses.append("step_kind = ?")
            args.append(step_kind.value)
        if path is not None:
            clauses.append("path = ?")
            args.append(path.value)
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        try:
            conn = self._connect()
            try:
                cur = conn.execute(
                    f"SELECT record_id, session_id, turn, timestamp, step_kind, payload, path "
                    f"FROM audit_record {where} ORDER BY record_id",
                    args,
                )
                rows = cur.fetchall()
            finally:
                conn.close()
        except sqlite3.Error as exc:
            raise AuditError(f"audit query failed: {exc}") from exc
        return [
            AuditRecord(
                record_id=r[0],
                session_id=r[1],
                turn=r[2],
                timestamp=r[3],
                step_kind=StepKind(r[4]),
                payload=json.loads(r[5]),
                path=PathKind(r[6]),
            )
            for r in rows
        ]

    def replay_conversation(self, session_id: str) -> list[ChatMessage]:
        """Reconstruct the session transcript from message-bearing payloads."""
        records = self.query_records(session_id=session_id)
        if not records:
            raise MissingSessionError(f"no audit records for session {session_id!r}")
        messages: list[ChatMessage] = []
        for record in records:
            if record.step_kind is StepKind.FAULT and record.payload.get("halts_replay"):
                break
            system_msg = record.payload.get("system_message")
            if system_msg:
                messages.append(ChatMessage.from_dict(system_msg))
            for key in ("message", "feedback_message"):
                msg = record.payload.get(key)
                if msg:
                    messages.append(ChatMessage.from_dict(msg))
        return messages

    def export_jsonl(self, path: str | Path, session_id: str | None = None) -> int:
        """Dump records as JSON Lines; returns the number written."""
        records = self.query_records(session_id=session_id)
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        return len(records)
