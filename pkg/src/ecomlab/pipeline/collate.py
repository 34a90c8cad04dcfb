"""Roll bid records up to coarser levels of aggregation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Sequence

from ..market import Money, Timestamp


class Level(str, enum.Enum):
    BID = "Bid"
    BIDDER = "Bidder"
    AUCTION = "Auction"
    CATEGORY = "Category"
    DAY = "Day"


@dataclass(frozen=True)
class BidRecord:
    """One observed bid with the context needed to aggregate it."""

    auction_id: str
    bidder_id: str
    category: str
    placed_at: Timestamp
    price: Money
    quantity: int
    final_winner: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class CollatedRow:
    key: tuple[str, ...]
    bids: int
    bidders: int
    winners: int
    amount: Money

    def to_dict(self, level: Level) -> dict:
        return {
            "level": level.value,
            "key": "/".join(self.key),
            "bids": self.bids,
            "bidders": self.bidders,
            "winners": self.winners,
            "amount": self.amount,
        }


def _day(ts: Timestamp) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


KEYS: dict[Level, Callable[[BidRecord], tuple[str, ...]]] = {
    Level.BID: lambda r: (r.auction_id, r.bidder_id, f"{r.placed_at:012d}"),
    Level.BIDDER: lambda r: (r.auction_id, r.bidder_id),
    Level.AUCTION: lambda r: (r.auction_id,),
    Level.CATEGORY: lambda r: (r.category,),
    Level.DAY: lambda r: (_day(r.placed_at),),
}


def collate(records: Iterable[BidRecord], level: Level | str) -> list[CollatedRow]:
    """Aggregate at ``level``, rows sorted by key.

    ``bids`` and ``amount`` (price times quantity) are additive, so any
    coarser level sums to the same totals as any finer one. ``bidders`` and
    ``winners`` count distinct (auction, bidder) pairs within each row.
    """
    try:
        level = Level(level)
    except ValueError:
        raise ValueError(f"unknown aggregation level {level!r}; expected one of {[l.value for l in Level]}") from None
    key_of = KEYS[level]
    groups: dict[tuple[str, ...], list[BidRecord]] = {}
    for r in records:
        groups.setdefault(key_of(r), []).append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        rows.append(
            CollatedRow(
                key=key,
                bids=len(rs),
                bidders=len({(r.auction_id, r.bidder_id) for r in rs}),
                winners=len({(r.auction_id, r.bidder_id) for r in rs if r.final_winner}),
                amount=sum(r.price * r.quantity for r in rs),
            )
        )
    return rows


def bid_records(events: Sequence, category_of: dict[str, str], winners_of: dict[str, set[str]]) -> list[BidRecord]:
    """Bid records from inferred events, stamped with their observation time."""
    return [
        BidRecord(
            auction_id=e.auction_id,
            bidder_id=e.bidder_id,
            category=category_of.get(e.auction_id, ""),
            placed_at=e.observed_at,
            price=e.price,
            quantity=e.quantity,
            final_winner=e.bidder_id in winners_of.get(e.auction_id, set()),
        )
        for e in events
    ]
