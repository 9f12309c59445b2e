"""Replay backend: serves responses from a JSON Lines expectation script.

Each line is ``{"match": {"contains": "..."}, "response": {...}, "repeat": N}``.
Entries are consumed in order; an entry with ``repeat`` serves that many calls
before the cursor advances. A call whose conversation does not contain the
current entry's match text is a script mismatch and fails loudly, since
scripts are test fixtures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .base import (
    BackendResponse,
    ChatMessage,
    ScriptError,
    ToolDescriptor,
    check_call_preconditions,
)


@dataclass(frozen=True)
class ScriptEntry:
    contains: str
    response: BackendResponse
    repeat: int = 1


@dataclass(frozen=True)
class ScriptTable:
    entries: tuple[ScriptEntry, ...]


def parse_script_line(line: str, lineno: int) -> ScriptEntry:
    try:
        obj = json.loads(line)
        match = obj.get("match", {})
        response = BackendResponse.from_dict(obj["response"])
        repeat = int(obj.get("repeat", 1))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ScriptError(f"script line {lineno}: {exc}") from exc
    if repeat < 1:
        raise ScriptError(f"script line {lineno}: repeat must be >= 1")
    return ScriptEntry(contains=match.get("contains", ""), response=response, repeat=repeat)


def load_script(path: str | Path) -> ScriptTable:
    """Parse a JSON Lines script file into an ordered expectation table."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        entries.append(parse_script_line(line, lineno))
    return ScriptTable(entries=tuple(entries))


class ScriptedBackend:
    """Cursor over a ScriptTable. One instance belongs to one conversation."""

    def __init__(self, table: ScriptTable):
        self.table = table
        self._index = 0
        self._served_from_current = 0
        self._call_seq = 0

    @classmethod
    def from_path(cls, path: str | Path) -> "ScriptedBackend":
        return cls(load_script(path))

    def complete(
        self, messages: Sequence[ChatMessage], tools: Sequence[ToolDescriptor]
    ) -> BackendResponse:
        check_call_preconditions(messages)
        self._call_seq += 1
        if self._index >= len(self.table.entries):
            raise ScriptError(f"script exhausted at call {self._call_seq}")
        entry = self.table.entries[self._index]
        if entry.contains:
            transcript = "\n".join(m.content for m in messages if m.content)
            if entry.contains.lower() not in transcript.lower():
                raise ScriptError(
                    f"script entry {self._index + 1} expected conversation to contain "
                    f"{entry.contains!r}"
                )
        self._served_from_current += 1
        if self._served_from_current >= entry.repeat:
            self._index += 1
            self._served_from_current = 0
        return entry.response
