"""Example-query retrieval for the baseline: token-overlap ranking.

Hermetic mode ranks by Jaccard similarity of normalized token sets; an
embedding index could substitute in live deployments, but determinism wins
for testing. Ties break by example id ascending.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

STOPWORDS = {
    "a", "an", "the", "all", "any", "me", "my", "our", "i", "you", "we", "they",
    "it", "that", "this", "these", "those", "show", "list", "give", "find",
    "get", "fetch", "in", "by", "of", "for", "to", "on", "at", "is", "are",
    "was", "were", "please", "and", "or", "with", "against", "what", "which",
    "who", "how", "many", "much", "do", "does", "did", "from", "into", "as",
    "per", "entered",
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SLOT_RE = re.compile(r"\{(\w+)\}")


def normalize_tokens(text: str) -> frozenset[str]:
    return frozenset(t for t in _TOKEN_RE.findall(text.lower()) if t not in STOPWORDS)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass(frozen=True)
class ExampleEntry:
    """One retrievable example: a question shape and its SQL template with named slots."""

    example_id: str
    nl_text: str
    sql_template: str
    slots: tuple[tuple[str, str], ...] = ()
    tokens: frozenset[str] = field(default=frozenset())

    def __post_init__(self) -> None:
        if not self.tokens:
            object.__setattr__(self, "tokens", normalize_tokens(self.nl_text))
        template_slots = set(_SLOT_RE.findall(self.sql_template))
        declared = {name for name, _ in self.slots}
        if template_slots != declared:
            raise ValueError(
                f"example {self.example_id}: template slots {sorted(template_slots)} "
                f"do not match declared slots {sorted(declared)}"
            )


def retrieve_examples(
    query_tokens: frozenset[str], index: list[ExampleEntry], k: int
) -> list[tuple[ExampleEntry, float]]:
    """Top-k examples by Jaccard similarity, ties broken by example id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(entry, jaccard(query_tokens, entry.tokens)) for entry in index]
    scored.sort(key=lambda item: (-item[1], item[0].example_id))
    return scored[:k]


def load_examples_file(path: str | Path) -> list[ExampleEntry]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = []
    for item in payload["examples"]:
        entries.append(
            ExampleEntry(
                example_id=item["example_id"],
                nl_text=item["nl_text"],
                sql_template=item["sql_template"],
                slots=tuple((s["name"], s["kind"]) for s in item.get("slots", [])),
                tokens=frozenset(item["tokens"]) if item.get("tokens") else frozenset(),
            )
        )
    return entries
