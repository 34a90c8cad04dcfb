"""Filter records in the store with a small predicate language.

A query is one or more comparisons joined by ``and``::

    category = Books and posted_price >= 1500
    auction_id = A0003

Operators are ``= != < <= > >= ~`` (``~`` is substring match). Literals
are parsed as JSON when possible (numbers, true/false, null) and fall back
to plain text; quote them to force text. Dotted fields reach into nested
objects, e.g. ``product.category``.
"""

from __future__ import annotations

import json
import operator
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator

from .store import StoreLayout, read_jsonl


class QueryError(ValueError):
    pass


OPS: dict[str, Callable[[Any, Any], bool]] = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "~": lambda a, b: str(b) in str(a),
}


@dataclass(frozen=True)
class Clause:
    field: str
    op: str
    value: Any

    def test(self, record: dict) -> bool:
        actual = lookup(record, self.field)
        try:
            return bool(OPS[self.op](actual, self.value))
        except TypeError:
            # an ordering comparison across types (e.g. None < 3) never matches
            return False


def lookup(record: dict, path: str) -> Any:
    value: Any = record
    for part in path.split("."):
        if not isinstance(value, dict) or part not in value:
            raise KeyError(path)
        value = value[part]
    return value


def _literal(token: str, quoted: bool) -> Any:
    if quoted:
        return token
    try:
        return json.loads(token)
    except json.JSONDecodeError:
        return token


_TOKEN = re.compile(r"""\s*(?:"((?:[^"\\]|\\.)*)"|'([^']*)'|(!=|<=|>=|=|<|>|~)|([^\s=!<>~"']+))""")


def _tokens(text: str) -> list[tuple[str, bool]]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise QueryError(f"cannot tokenize query at {text[pos:]!r}")
        dq, sq, op, word = m.groups()
        if dq is not None or sq is not None:
            out.append((dq if dq is not None else sq, True))
        else:
            out.append((op or word, False))
        pos = m.end()
    return out


def parse_query(text: str) -> list[Clause]:
    """Parse ``field op literal [and field op literal ...]``; empty text matches everything."""
    tokens = _tokens(text)
    clauses: list[Clause] = []
    i = 0
    while i < len(tokens):
        if clauses:
            if tokens[i] != ("and", False):
                raise QueryError(f"expected 'and' before {tokens[i][0]!r}")
            i += 1
        if i + 3 > len(tokens):
            raise QueryError("incomplete comparison at end of query")
        (fld, fq), (op, oq), (lit, quoted) = tokens[i : i + 3]
        if oq or op not in OPS:
            raise QueryError(f"unknown operator {op!r}; use one of {' '.join(OPS)}")
        if fq or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*", fld):
            raise QueryError(f"bad field name {fld!r}")
        clauses.append(Clause(fld, op, _literal(lit, quoted)))
        i += 3
    return clauses


def known_fields(record: dict, prefix: str = "") -> set[str]:
    out = set()
    for key, value in record.items():
        out.add(prefix + key)
        if isinstance(value, dict):
            out |= known_fields(value, f"{prefix}{key}.")
    return out


def filter_records(records: Iterable[dict], clauses: list[Clause]) -> Iterator[dict]:
    """Yield matching records; a field absent from the record set is an error."""
    checked = False
    for rec in records:
        if not checked:
            fields = known_fields(rec)
            missing = [c.field for c in clauses if c.field not in fields]
            if missing:
                raise QueryError(f"unknown field(s) {missing}; available: {', '.join(sorted(fields))}")
            checked = True
        try:
            if all(c.test(rec) for c in clauses):
                yield rec
        except KeyError:
            continue


def available(layout: StoreLayout) -> list[str]:
    return sorted(p.stem for p in layout.records_dir.glob("*.jsonl"))


def query(layout: StoreLayout, name: str, text: str = "") -> Iterator[dict]:
    """Stream records of ``name`` (e.g. ``snapshots``) that satisfy the query ``text``."""
    path = layout.records(name)
    if not path.exists():
        raise QueryError(f"no record set {name!r}; available: {', '.join(available(layout)) or 'none'}")
    return filter_records(read_jsonl(path, raw=True), parse_query(text))
