"""Identifier extraction for the baseline's draft validation step.

A minimal tokenizer plus clause grammar for the SELECT subset this project
ships; not a general SQL parser. Tracks token spans so identifier renames can
be applied textually without disturbing anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class SqlParseError(Exception):
    pass


class TokKind(Enum):
    WORD = "WORD"
    STRING = "STRING"
    NUMBER = "NUMBER"
    PUNCT = "PUNCT"


@dataclass(frozen=True)
class Token:
    kind: TokKind
    value: str
    start: int
    end: int


KEYWORDS = {
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "IS", "NULL", "LIKE",
    "BETWEEN", "EXISTS", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "OUTER",
    "CROSS", "ON", "AS", "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC",
    "LIMIT", "OFFSET", "DISTINCT", "UNION", "ALL", "CASE", "WHEN", "THEN",
    "ELSE", "END",
}

_JOINERS = {"JOIN", "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS"}
_CLAUSE_STARTERS = {"FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT"}

_TWO_CHAR_OPS = ("<=", ">=", "<>", "!=", "||")
_ONE_CHAR_PUNCT = set("(),.*=<>!+-/%;?|")


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
            continue
        if c == "'":
            j = i + 1
            while True:
                if j >= n:
                    raise SqlParseError(f"unterminated string literal at offset {i}")
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        j += 2
                        continue
                    break
                j += 1
            tokens.append(Token(TokKind.STRING, sql[i : j + 1], i, j + 1))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and (sql[j].isdigit() or sql[j] == "."):
                j += 1
            tokens.append(Token(TokKind.NUMBER, sql[i:j], i, j))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token(TokKind.WORD, sql[i:j], i, j))
            i = j
            continue
        two = sql[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(TokKind.PUNCT, two, i, i + 2))
            i += 2
            continue
        if c in _ONE_CHAR_PUNCT:
            tokens.append(Token(TokKind.PUNCT, c, i, i + 1))
            i += 1
            continue
        raise SqlParseError(f"unexpected character {c!r} at offset {i}")
    return tokens


@dataclass
class ScanResult:
    """Identifiers found in one statement, in order of first appearance."""

    tables: list[str] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)
    aliases: dict[str, str] = field(default_factory=dict)
    table_spans: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    field_spans: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    def _add(self, bucket: list[str], spans: dict, name: str, token: Token) -> None:
        if name not in bucket:
            bucket.append(name)
        spans.setdefault(name, []).append((token.start, token.end))

    def add_table(self, token: Token) -> None:
        self._add(self.tables, self.table_spans, token.value, token)

    def add_field(self, token: Token) -> None:
        self._add(self.fields, self.field_spans, token.value, token)


def _is_kw(token: Token, *words: str) -> bool:
    return token.kind is TokKind.WORD and token.value.upper() in words


def scan_sql(sql: str) -> ScanResult:
    """Walk one SELECT statement and collect table and field identifiers.

    Tables are the names following FROM and JOIN (and qualifiers of ``t.f``
    references that are not aliases). Fields are identifiers in the select
    list, ON, WHERE, GROUP BY, HAVING, and ORDER BY, excluding literals,
    ``*``, keywords, function names, and declared aliases.
    """
    tokens = tokenize(sql)
    if not tokens or not _is_kw(tokens[0], "SELECT"):
        raise SqlParseError("statement must start with SELECT")

    # Clause boundaries at parenthesis depth zero.
    boundaries: list[tuple[str, int]] = []
    depth = 0
    for idx, token in enumerate(tokens):
        if token.kind is TokKind.PUNCT and token.value == "(":
            depth += 1
        elif token.kind is TokKind.PUNCT and token.value == ")":
            depth -= 1
        elif depth == 0 and token.kind is TokKind.WORD and token.value.upper() in _CLAUSE_STARTERS:
            boundaries.append((token.value.upper(), idx))
    clause_at = dict(boundaries)
    if "FROM" not in clause_at:
        raise SqlParseError("statement has no FROM clause")

    def segment(start_kw: str) -> list[Token]:
        start = clause_at.get(start_kw)
        if start is None:
            return []
        following = [idx for kw, idx in boundaries if idx > start]
        end = min(following) if following else len(tokens)
        return tokens[start + 1 : end]

    result = ScanResult()
    select_segment = tokens[1 : clause_at["FROM"]]
    if not select_segment:
        raise SqlParseError("empty select list")

    # FROM clause: table references, aliases, and ON expressions.
    from_segment = segment("FROM")
    on_pool: list[Token] = []
    i = 0
    expect_table = True
    while i < len(from_segment):
        token = from_segment[i]
        if expect_table:
            if token.kind is not TokKind.WORD or token.value.upper() in KEYWORDS:
                raise SqlParseError(f"expected table name, got {token.value!r}")
            table_token = token
            result.add_table(table_token)
            i += 1
            if i < len(from_segment) and _is_kw(from_segment[i], "AS"):
                i += 1
            if (
                i < len(from_segment)
                and from_segment[i].kind is TokKind.WORD
                and from_segment[i].value.upper() not in KEYWORDS
            ):
                result.aliases[from_segment[i].value] = table_token.value
                i += 1
            expect_table = False
            continue
        if token.kind is TokKind.PUNCT and token.value == ",":
            expect_table = True
            i += 1
            continue
        if token.kind is TokKind.WORD and token.value.upper() in _JOINERS:
            if token.value.upper() == "JOIN":
                expect_table = True
            i += 1
            continue
        if _is_kw(token, "ON"):
            i += 1
            while i < len(from_segment):
                nxt = from_segment[i]
                if nxt.kind is TokKind.WORD and nxt.value.upper() in _JOINERS | {","}:
                    break
                if nxt.kind is TokKind.PUNCT and nxt.value == ",":
                    break
                on_pool.append(nxt)
                i += 1
            continue
        raise SqlParseError(f"unexpected token {token.value!r} in FROM clause")

    expression_pools = [
        select_segment,
        on_pool,
        segment("WHERE"),
        segment("GROUP"),
        segment("HAVING"),
        segment("ORDER"),
    ]
    for pool in expression_pools:
        _collect_fields(pool, result)
    return result


def _collect_fields(pool: list[Token], result: ScanResult) -> None:
    for idx, token in enumerate(pool):
        if token.kind is not TokKind.WORD:
            continue
        upper = token.value.upper()
        nxt = pool[idx + 1] if idx + 1 < len(pool) else None
        prev = pool[idx - 1] if idx > 0 else None
        if upper in KEYWORDS:
            continue
        if nxt is not None and nxt.kind is TokKind.PUNCT and nxt.value == "(":
            continue  # function name
        if prev is not None and _is_kw(prev, "AS"):
            continue  # output alias
        if prev is not None and prev.kind is TokKind.PUNCT and prev.value == ".":
            continue  # field part of a qualified reference, handled below
        if nxt is not None and nxt.kind is TokKind.PUNCT and nxt.value == ".":
            # Qualifier: an alias or a direct table reference.
            if token.value not in result.aliases:
                result.add_table(token)
            member = pool[idx + 2] if idx + 2 < len(pool) else None
            if member is not None and member.kind is TokKind.WORD:
                result.add_field(member)
            continue
        if token.value in result.aliases:
            continue
        result.add_field(token)


def extract_identifiers(sql: str) -> tuple[list[str], list[str]]:
    """Tables and fields referenced by one SELECT statement."""
    scan = scan_sql(sql)
    return scan.tables, scan.fields


def apply_renames(sql: str, spans_to_names: list[tuple[tuple[int, int], str]]) -> str:
    """Replace identifier spans with new names, right to left."""
    out = sql
    for (start, end), new_name in sorted(spans_to_names, key=lambda item: -item[0][0]):
        out = out[:start] + new_name + out[end:]
    return out


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a or not b:
        return max(len(a), len(b))
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]
