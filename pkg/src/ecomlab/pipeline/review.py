"""Anomaly flagging and the persistent human-review queue."""

from __future__ import annotations

import enum
import hashlib
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from ..extractor import Malformed
from ..market import from_iso, iso
from ..records import AuctionSnapshot, PriceQuote, RetailerProfile
from .cleanse import CleanseStatus, CleanseVerdict
from .reconstruct import BidderProfile


class ReasonCode(str, enum.Enum):
    MALFORMED_DOC = "MalformedDoc"
    SAMPLING_LOSS = "SamplingLoss"
    IMPOSSIBLE_VALUE = "ImpossibleValue"
    DUPLICATE_KEY = "DuplicateKey"
    MANUAL_CLASSIFY_NEEDED = "ManualClassifyNeeded"


class ReviewError(KeyError):
    pass


def item_id(reason: ReasonCode, record_ref: str) -> str:
    return hashlib.sha256(f"{reason.value}|{record_ref}".encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ReviewItem:
    item_id: str
    record_ref: str
    reason_code: ReasonCode
    detail: str
    created_at: int
    resolved: bool = False
    resolution_note: str = ""

    @classmethod
    def new(cls, reason: ReasonCode, record_ref: str, detail: str, created_at: int) -> ReviewItem:
        return cls(item_id(reason, record_ref), record_ref, reason, detail, created_at)

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "record_ref": self.record_ref,
            "reason_code": self.reason_code.value,
            "detail": self.detail,
            "created_at": iso(self.created_at),
            "resolved": self.resolved,
            "resolution_note": self.resolution_note,
        }


class ReviewQueue:
    """Append-only JSONL log of flag and resolve operations.

    The current state is the fold of the log: flagging an id that already
    exists is a no-op, resolving marks an item and keeps it for audit.
    """

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()

    def _ops(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield json.loads(line)

    def _append(self, ops: Sequence[dict]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for op in ops:
                fh.write(json.dumps(op, sort_keys=True) + "\n")

    def items(self) -> dict[str, ReviewItem]:
        state: dict[str, ReviewItem] = {}
        for op in self._ops():
            if op["op"] == "flag" and op["item_id"] not in state:
                state[op["item_id"]] = ReviewItem(
                    op["item_id"],
                    op["record_ref"],
                    ReasonCode(op["reason_code"]),
                    op["detail"],
                    from_iso(op["created_at"]),
                )
            elif op["op"] == "resolve":
                old = state[op["item_id"]]
                state[op["item_id"]] = ReviewItem(
                    old.item_id, old.record_ref, old.reason_code, old.detail, old.created_at, True, op["note"]
                )
        return state

    def __len__(self) -> int:
        return len(self.items())

    def add(self, items: Iterable[ReviewItem]) -> list[ReviewItem]:
        """Append items not already queued; returns the ones actually added."""
        with self._lock:
            known = self.items()
            fresh: dict[str, ReviewItem] = {}
            for it in items:
                if it.item_id not in known and it.item_id not in fresh:
                    fresh[it.item_id] = it
            self._append(
                [
                    {
                        "op": "flag",
                        "item_id": it.item_id,
                        "record_ref": it.record_ref,
                        "reason_code": it.reason_code.value,
                        "detail": it.detail,
                        "created_at": iso(it.created_at),
                    }
                    for it in fresh.values()
                ]
            )
            return list(fresh.values())

    def unresolved(self) -> list[ReviewItem]:
        return [it for it in self.items().values() if not it.resolved]

    def resolve(self, item_id: str, note: str, at: int | None = None) -> ReviewItem:
        with self._lock:
            state = self.items()
            if item_id not in state:
                raise ReviewError(f"no review item {item_id!r}")
            if state[item_id].resolved:
                raise ReviewError(f"review item {item_id!r} is already resolved")
            at = int(time.time()) if at is None else at
            self._append([{"op": "resolve", "item_id": item_id, "note": note, "at": iso(at)}])
            return self.items()[item_id]


# ------------------------------------------------------------------ rules

Finding = tuple[ReasonCode, str, str]
AnomalyRule = Callable[[Sequence[object]], Iterator[Finding]]


def _ref(record: object) -> str:
    if isinstance(record, AuctionSnapshot):
        return f"auction:{record.auction_id}@{iso(record.capture_time)}"
    if isinstance(record, PriceQuote):
        return f"quote:{record.retailer_id}/{record.product_id}@{iso(record.capture_time)}"
    if isinstance(record, RetailerProfile):
        return f"retailer:{record.retailer_id}"
    if isinstance(record, BidderProfile):
        return f"bidder:{record.auction_id}/{record.bidder_id}"
    if isinstance(record, Malformed):
        return f"doc:{record.target}@{iso(record.capture_time)}"
    if isinstance(record, CleanseVerdict):
        return f"series:{record.auction_id}"
    return f"record:{record!r}"


def malformed_rule(records: Sequence[object]) -> Iterator[Finding]:
    for r in records:
        if isinstance(r, Malformed):
            yield ReasonCode.MALFORMED_DOC, _ref(r), r.reason


def sampling_loss_rule(records: Sequence[object]) -> Iterator[Finding]:
    for r in records:
        if isinstance(r, CleanseVerdict) and r.status is CleanseStatus.SAMPLING_LOSS:
            yield ReasonCode.SAMPLING_LOSS, _ref(r), r.detail


def impossible_value_rule(records: Sequence[object]) -> Iterator[Finding]:
    for r in records:
        problems = []
        if isinstance(r, PriceQuote) and r.posted_price <= 0:
            problems.append(f"posted_price {r.posted_price}")
        elif isinstance(r, AuctionSnapshot):
            if r.lot_size < 1:
                problems.append(f"lot_size {r.lot_size}")
            if r.min_required_bid <= 0:
                problems.append(f"min_required_bid {r.min_required_bid}")
            problems += [f"winner {w.bidder_id} price {w.price}" for w in r.winners if w.price <= 0]
            problems += [f"winner {w.bidder_id} quantity {w.quantity}" for w in r.winners if w.quantity < 1]
            units = sum(w.quantity for w in r.winners)
            if r.lot_size >= 1 and units > r.lot_size:
                problems.append(f"{units} units awarded from a lot of {r.lot_size}")
        elif isinstance(r, BidderProfile):
            if r.bid_count < 1:
                problems.append(f"bid_count {r.bid_count}")
            if r.final_bid <= 0:
                problems.append(f"final_bid {r.final_bid}")
            if r.entry_time > r.exit_time:
                problems.append("entry after exit")
        if problems:
            yield ReasonCode.IMPOSSIBLE_VALUE, _ref(r), "; ".join(problems)


def duplicate_key_rule(records: Sequence[object]) -> Iterator[Finding]:
    """Two different records claiming the same primary key."""
    seen: dict[str, object] = {}
    for r in records:
        if isinstance(r, (AuctionSnapshot, PriceQuote, RetailerProfile)):
            key = _ref(r)
            if key in seen and seen[key] != r:
                yield ReasonCode.DUPLICATE_KEY, key, "conflicting records share this key"
            seen.setdefault(key, r)


DEFAULT_RULES: tuple[AnomalyRule, ...] = (
    malformed_rule,
    sampling_loss_rule,
    impossible_value_rule,
    duplicate_key_rule,
)


def find_anomalies(records: Iterable[object], rules: Sequence[AnomalyRule] = DEFAULT_RULES) -> list[Finding]:
    records = list(records)
    return [f for rule in rules for f in rule(records)]


def flag_anomalies(
    records: Iterable[object],
    queue: ReviewQueue,
    rules: Sequence[AnomalyRule] = DEFAULT_RULES,
    now: int | None = None,
) -> list[ReviewItem]:
    """Queue a review item per finding; already-queued findings are skipped."""
    now = int(time.time()) if now is None else now
    items = [ReviewItem.new(reason, ref, detail, now) for reason, ref, detail in find_anomalies(records, rules)]
    return queue.add(items)
