"""Rule-driven extraction of structured records from raw documents.

A rule file maps each field to a pair of literal anchors. The value is the
text between the first occurrence of the prefix and the next occurrence of
the suffix; ``repeat`` rules collect every occurrence, and repeat rules in
the same group are zipped into rows. Example::

    name: yankee-auction
    kind: AuctionPage
    lot_size := "<td class=\\"lot\\">" ... "</td>"
    bidder_id := "<tr><td class=\\"who\\">" ... "</td>" repeat winners

Extraction checks syntax and types only. Semantic checks (positive prices,
winner units within the lot) belong to the anomaly flagger so that bad
values are quarantined for review instead of vanishing here.
"""

from __future__ import annotations

import enum
import html
import re
import shlex
from dataclasses import dataclass
from datetime import date
from importlib import resources
from typing import Any, Callable

from .harvester import RawDocument
from .market import Condition, Money, ProductInfo, from_iso
from .records import AuctionSnapshot, PriceQuote, Ratings, RetailerProfile, SearchObservation, WinnerRow


class RecordKind(str, enum.Enum):
    AUCTION_PAGE = "AuctionPage"
    SEARCH_RESULTS = "SearchResults"
    QUOTE_PAGE = "QuotePage"


class RuleCompileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# fields each kind must define a rule for
SCHEMA: dict[RecordKind, tuple[str, ...]] = {
    RecordKind.AUCTION_PAGE: (
        "auction_id", "title", "category", "condition", "life_cycle",
        "lot_size", "min_required_bid", "bidder_id", "price", "quantity",
    ),
    RecordKind.SEARCH_RESULTS: (
        "query_album", "sharer_id", "file_title", "album_match",
        "file_size", "bitrate", "track_length", "connection_class",
    ),
    RecordKind.QUOTE_PAGE: ("listing_kind", "listing_id"),
}

RATING_FIELDS = ("on_time_delivery", "customer_support", "product_met_expectations", "shop_again")
RATING_BLOCK = RATING_FIELDS + ("survey_count", "window_start", "window_end")


@dataclass(frozen=True)
class AnchorRule:
    field: str
    prefix: str
    suffix: str
    repeat: bool = False
    group: str = "rows"


@dataclass(frozen=True)
class ExtractionRuleSet:
    name: str
    record_kind: RecordKind
    field_rules: dict[str, AnchorRule]
    required_fields: frozenset[str]

    def __post_init__(self) -> None:
        missing = self.required_fields - set(self.field_rules)
        if missing:
            raise RuleCompileError(f"required fields without a rule: {sorted(missing)}")
        for r in self.field_rules.values():
            if not r.prefix or not r.suffix:
                raise RuleCompileError(f"field {r.field!r} has an empty anchor")

    def scalars(self) -> list[AnchorRule]:
        return [r for r in self.field_rules.values() if not r.repeat]

    def groups(self) -> dict[str, list[AnchorRule]]:
        out: dict[str, list[AnchorRule]] = {}
        for r in self.field_rules.values():
            if r.repeat:
                out.setdefault(r.group, []).append(r)
        return out


@dataclass(frozen=True)
class Malformed:
    target: str
    capture_time: int
    reason: str
    field: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"target": self.target, "capture_time": self.capture_time, "reason": self.reason, "field": self.field}


def compile_rules(text: str) -> ExtractionRuleSet:
    """Parse rule-file text; errors carry the offending line number."""
    name: str | None = None
    kind: RecordKind | None = None
    rules: dict[str, AnchorRule] = {}
    prefixes: dict[str, str] = {}
    last_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        try:
            tokens = shlex.split(raw, comments=True, posix=True)
        except ValueError as exc:
            raise RuleCompileError(f"cannot tokenize: {exc}", lineno) from None
        if not tokens:
            continue
        if tokens[0].endswith(":=") and tokens[0] != ":=":
            tokens = [tokens[0][:-2], ":="] + tokens[1:]
        if tokens[0] in ("name:", "kind:"):
            if len(tokens) != 2:
                raise RuleCompileError(f"header {tokens[0]} takes one value", lineno)
            if tokens[0] == "name:":
                name = tokens[1]
            else:
                try:
                    kind = RecordKind(tokens[1])
                except ValueError:
                    raise RuleCompileError(f"unknown record kind {tokens[1]!r}", lineno) from None
            continue
        if len(tokens) < 5 or tokens[1] != ":=" or tokens[3] != "...":
            raise RuleCompileError('expected: field := "<prefix>" ... "<suffix>" [repeat [group]]', lineno)
        fname, prefix, suffix, tail = tokens[0], tokens[2], tokens[4], tokens[5:]
        if not re.fullmatch(r"[a-z_][a-z0-9_]*", fname):
            raise RuleCompileError(f"bad field name {fname!r}", lineno)
        if not prefix or not suffix:
            raise RuleCompileError(f"field {fname!r} has an empty anchor", lineno)
        repeat, group = False, "rows"
        if tail:
            if tail[0] != "repeat" or len(tail) > 2:
                raise RuleCompileError(f"unexpected trailing tokens {tail}", lineno)
            repeat = True
            if len(tail) == 2:
                group = tail[1]
        if fname in rules:
            raise RuleCompileError(f"duplicate rule for field {fname!r}", lineno)
        if prefix in prefixes:
            raise RuleCompileError(f"prefix anchor of {fname!r} duplicates that of {prefixes[prefix]!r}", lineno)
        prefixes[prefix] = fname
        rules[fname] = AnchorRule(fname, prefix, suffix, repeat, group)
    if kind is None:
        raise RuleCompileError("missing 'kind:' header", last_line)
    for required in SCHEMA[kind]:
        if required not in rules:
            raise RuleCompileError(f"no rule for required field {required!r}", last_line)
    required = frozenset(f for f in SCHEMA[kind] if not rules[f].repeat)
    return ExtractionRuleSet(name or kind.value, kind, rules, required)


def load_rules(kind: RecordKind | str) -> ExtractionRuleSet:
    """Compile one of the bundled rule files."""
    filename = {
        RecordKind.AUCTION_PAGE: "auction.rules",
        RecordKind.SEARCH_RESULTS: "search.rules",
        RecordKind.QUOTE_PAGE: "quotes.rules",
    }[RecordKind(kind)]
    return compile_rules(resources.files("ecomlab.rules").joinpath(filename).read_text(encoding="utf-8"))


# ------------------------------------------------------------------ scanning


class _Reject(Exception):
    def __init__(self, reason: str, field: str | None = None):
        self.reason = reason
        self.field = field
        super().__init__(reason)


def _between(text: str, rule: AnchorRule, start: int) -> tuple[str, int] | None:
    i = text.find(rule.prefix, start)
    if i < 0:
        return None
    i += len(rule.prefix)
    j = text.find(rule.suffix, i)
    if j < 0:
        raise _Reject(f"unterminated value for {rule.field!r}", rule.field)
    return html.unescape(text[i:j]), j + len(rule.suffix)


def _scan(text: str, rules: ExtractionRuleSet) -> tuple[dict[str, str], dict[str, list[dict[str, str]]]]:
    scalars: dict[str, str] = {}
    for rule in rules.scalars():
        hit = _between(text, rule, 0)
        if hit is None:
            if rule.field in rules.required_fields:
                raise _Reject(f"missing anchor for {rule.field!r}", rule.field)
            continue
        scalars[rule.field] = hit[0]
    groups: dict[str, list[dict[str, str]]] = {}
    for group, members in rules.groups().items():
        columns: dict[str, list[str]] = {}
        for rule in members:
            values, pos = [], 0
            while (hit := _between(text, rule, pos)) is not None:
                values.append(hit[0])
                pos = hit[1]
            columns[rule.field] = values
        counts = {len(v) for v in columns.values()}
        if len(counts) > 1:
            detail = ", ".join(f"{f}={len(v)}" for f, v in columns.items())
            raise _Reject(f"ragged rows in group {group!r} ({detail})", members[0].field)
        n = counts.pop() if counts else 0
        groups[group] = [{f: columns[f][i] for f in columns} for i in range(n)]
    return scalars, groups


# ------------------------------------------------------------------ coercion

_MONEY = re.compile(r"(-?)\$?((?:\d{1,3}(?:,\d{3})+)|\d+)(?:\.(\d{1,2}))?")


def parse_money(text: str) -> Money:
    """US-style money to cents: ``"$1,234.56"``, ``"1234.5"`` and ``"-$5"`` are accepted."""
    m = _MONEY.fullmatch(text.strip())
    if m is None:
        raise ValueError(f"not a money amount: {text!r}")
    sign, whole, frac = m.groups()
    cents = int(whole.replace(",", "")) * 100 + int((frac or "0").ljust(2, "0"))
    return -cents if sign else cents


def parse_int(text: str) -> int:
    t = text.strip()
    if not re.fullmatch(r"-?\d+", t):
        raise ValueError(f"not an integer: {text!r}")
    return int(t)


def parse_flag(text: str) -> bool:
    t = text.strip().lower()
    if t in ("yes", "true", "1"):
        return True
    if t in ("no", "false", "0"):
        return False
    raise ValueError(f"not a yes/no flag: {text!r}")


def _coerce(fields: dict[str, str], name: str, parse: Callable[[str], Any]) -> Any:
    try:
        return parse(fields[name])
    except (ValueError, KeyError, OverflowError) as exc:
        raise _Reject(f"cannot coerce {name!r}: {exc}", name) from None


def _optional(fields: dict[str, str], name: str, parse: Callable[[str], Any]) -> Any:
    return _coerce(fields, name, parse) if name in fields else None


def parse_time(text: str) -> int:
    return from_iso(text.strip())


def _decode(doc: RawDocument) -> str:
    try:
        return doc.body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise _Reject(f"undecodable bytes at offset {exc.start}") from None


def _guard(doc: RawDocument, rules: ExtractionRuleSet, kind: RecordKind, body: Callable[[str], Any]):
    if rules.record_kind is not kind:
        raise ValueError(f"rule set {rules.name!r} is for {rules.record_kind.value}, not {kind.value}")
    try:
        return body(_decode(doc))
    except _Reject as exc:
        return Malformed(doc.target, doc.capture_time, exc.reason, exc.field)


# ---------------------------------------------------------------- extractors


def extract_auction(doc: RawDocument, rules: ExtractionRuleSet) -> AuctionSnapshot | Malformed:
    def body(text: str) -> AuctionSnapshot:
        s, groups = _scan(text, rules)
        winners = tuple(
            WinnerRow(
                row["bidder_id"],
                _coerce(row, "price", parse_money),
                _coerce(row, "quantity", parse_int),
            )
            for row in groups[rules.field_rules["bidder_id"].group]
        )
        return AuctionSnapshot(
            auction_id=s["auction_id"],
            capture_time=doc.capture_time,
            product=ProductInfo(
                title=s["title"],
                category=s["category"],
                condition=_coerce(s, "condition", Condition),
                life_cycle=s["life_cycle"],
            ),
            min_required_bid=_coerce(s, "min_required_bid", parse_money),
            lot_size=_coerce(s, "lot_size", parse_int),
            winners=winners,
            bid_increment=_optional(s, "bid_increment", parse_money),
            closed=s.get("status", "").strip() == "closed",
            scheduled_open=_optional(s, "scheduled_open", parse_time),
            scheduled_close=_optional(s, "scheduled_close", parse_time),
            ends=_optional(s, "ends", parse_time),
        )

    return _guard(doc, rules, RecordKind.AUCTION_PAGE, body)


def extract_search(doc: RawDocument, rules: ExtractionRuleSet) -> list[SearchObservation] | Malformed:
    known = set(SCHEMA[RecordKind.SEARCH_RESULTS])

    def body(text: str) -> list[SearchObservation]:
        s, groups = _scan(text, rules)
        rows = groups[rules.field_rules["sharer_id"].group]
        out = []
        for row in rows:
            size = _coerce(row, "file_size", parse_int)
            rate = _coerce(row, "bitrate", parse_int)
            if size < 0 or rate < 0:
                raise _Reject("negative file_size or bitrate", "file_size" if size < 0 else "bitrate")
            out.append(
                SearchObservation(
                    capture_time=doc.capture_time,
                    query_album=s["query_album"],
                    sharer_id=row["sharer_id"],
                    file_title=row["file_title"],
                    album_match=_coerce(row, "album_match", parse_flag),
                    file_size=size,
                    bitrate=rate,
                    track_length=_coerce(row, "track_length", parse_int),
                    connection_class=row["connection_class"],
                    extra={k: v for k, v in sorted(row.items()) if k not in known},
                )
            )
        return out

    return _guard(doc, rules, RecordKind.SEARCH_RESULTS, body)


def extract_quotes(
    doc: RawDocument, rules: ExtractionRuleSet
) -> tuple[list[PriceQuote], RetailerProfile | None] | Malformed:
    """Quotes from a product listing, or a profile fragment from a retailer listing."""

    def body(text: str) -> tuple[list[PriceQuote], RetailerProfile | None]:
        s, groups = _scan(text, rules)
        listing = s["listing_kind"].strip()
        if listing == "product":
            if "category" not in s:
                raise _Reject("product listing without a category", "category")
            group = rules.field_rules["retailer_id"].group if "retailer_id" in rules.field_rules else None
            quotes = [
                PriceQuote(
                    retailer_id=row["retailer_id"],
                    product_id=s["listing_id"],
                    category=s["category"],
                    posted_price=_coerce(row, "price", parse_money),
                    condition=_coerce(row, "condition", Condition),
                    capture_time=doc.capture_time,
                )
                for row in (groups.get(group, []) if group else [])
            ]
            return quotes, None
        if listing == "retailer":
            return [], _retailer_fragment(s, groups, rules)
        raise _Reject(f"unknown listing kind {listing!r}", "listing_kind")

    return _guard(doc, rules, RecordKind.QUOTE_PAGE, body)


def _retailer_fragment(s: dict[str, str], groups: dict, rules: ExtractionRuleSet) -> RetailerProfile:
    present = [f for f in RATING_BLOCK if f in s]
    ratings, surveys, window = None, 0, None
    if present:
        if len(present) != len(RATING_BLOCK):
            missing = next(f for f in RATING_BLOCK if f not in s)
            raise _Reject(f"incomplete ratings block, missing {missing!r}", missing)
        try:
            ratings = Ratings(*(float(s[f]) for f in RATING_FIELDS))
            window = (date.fromisoformat(s["window_start"].strip()), date.fromisoformat(s["window_end"].strip()))
        except ValueError as exc:
            raise _Reject(f"bad ratings block: {exc}", "ratings") from None
        surveys = _coerce(s, "survey_count", parse_int)
    states: frozenset[str] = frozenset()
    if "state" in rules.field_rules:
        states = frozenset(row["state"].strip() for row in groups.get(rules.field_rules["state"].group, []))
    return RetailerProfile(
        retailer_id=s["listing_id"],
        ratings=ratings,
        survey_count=surveys,
        ratings_window=window,
        size_rank=_optional(s, "size_rank", parse_int),
        store_states=states,
        catalog=_coerce(s, "catalog", parse_flag) if "catalog" in s else False,
        refurb_discounter=_coerce(s, "refurb_discounter", parse_flag) if "refurb_discounter" in s else False,
    )


def extract(doc: RawDocument, rules: ExtractionRuleSet):
    """Dispatch on the rule set's record kind."""
    return {
        RecordKind.AUCTION_PAGE: extract_auction,
        RecordKind.SEARCH_RESULTS: extract_search,
        RecordKind.QUOTE_PAGE: extract_quotes,
    }[rules.record_kind](doc, rules)

