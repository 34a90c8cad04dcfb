"""Bid-history reconstruction from snapshot series, and the frivolous-bidder rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from ..constants import FRIVOLOUS_FRACTION
from ..market import Allocation, Award, Money, Timestamp
from ..records import AuctionSnapshot


@dataclass(frozen=True)
class BidEvent:
    """A bid inferred from the first snapshot that shows it.

    The bid was placed somewhere in ``(observed_after, observed_at]``;
    ``observed_after`` is None for the first capture of a series.
    """

    auction_id: str
    bidder_id: str
    price: Money
    quantity: int
    observed_at: Timestamp
    observed_after: Timestamp | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class BidderProfile:
    bidder_id: str
    auction_id: str
    entry_time: Timestamp
    exit_time: Timestamp
    bid_count: int
    final_bid: Money
    observed_quantities: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["observed_quantities"] = list(self.observed_quantities)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> BidderProfile:
        return cls(**{**d, "observed_quantities": tuple(d.get("observed_quantities", ()))})


def infer_events(series: Sequence[AuctionSnapshot]) -> list[BidEvent]:
    """Bid events visible in a series.

    A bidder who newly appears among the winners, or whose standing price
    rises, has bid since the previous capture. Being pushed out of the
    winner set is not an event for that bidder, and a change in awarded
    units alone is a partial-fill effect rather than a bid.
    """
    events: list[BidEvent] = []
    prev: dict[str, int] = {}
    prev_time: Timestamp | None = None
    for snap in series:
        if prev_time is not None and snap.capture_time <= prev_time:
            raise ValueError(
                f"capture times must increase: {snap.capture_time} after {prev_time} in {snap.auction_id}"
            )
        current = {}
        for w in snap.winners:
            current[w.bidder_id] = w.price
            if w.bidder_id not in prev or w.price > prev[w.bidder_id]:
                events.append(BidEvent(snap.auction_id, w.bidder_id, w.price, w.quantity, snap.capture_time, prev_time))
        prev, prev_time = current, snap.capture_time
    return events


def profiles_from_events(events: Iterable[BidEvent]) -> list[BidderProfile]:
    by_bidder: dict[tuple[str, str], list[BidEvent]] = {}
    for e in events:
        by_bidder.setdefault((e.auction_id, e.bidder_id), []).append(e)
    profiles = []
    for (aid, bidder), evs in sorted(by_bidder.items()):
        evs.sort(key=lambda e: e.observed_at)
        profiles.append(
            BidderProfile(
                bidder_id=bidder,
                auction_id=aid,
                entry_time=evs[0].observed_at,
                exit_time=evs[-1].observed_at,
                bid_count=len(evs),
                final_bid=evs[-1].price,
                observed_quantities=tuple(e.quantity for e in evs),
            )
        )
    return profiles


def reconstruct_bids(series: Sequence[AuctionSnapshot]) -> list[BidderProfile]:
    """Per-bidder entry, exit, bid count and final bid, sorted by bidder id."""
    return profiles_from_events(infer_events(series))


def final_allocation(series: Sequence[AuctionSnapshot]) -> Allocation:
    """The winner list of the last capture, as an allocation."""
    if not series:
        return Allocation()
    return Allocation(tuple(Award(w.bidder_id, w.quantity, w.price) for w in series[-1].winners))


def is_frivolous(final_bid: Money, lowest_winning: Money, fraction: float = FRIVOLOUS_FRACTION) -> bool:
    """Strictly below ``fraction`` of the lowest winning bid, compared exactly."""
    return final_bid < Fraction(str(fraction)) * lowest_winning


def filter_frivolous(
    profiles: Sequence[BidderProfile],
    final_allocation: Allocation,
    fraction: float = FRIVOLOUS_FRACTION,
) -> tuple[list[BidderProfile], list[BidderProfile]]:
    """Split into (valid, frivolous) against the lowest winning price at close."""
    lowest = final_allocation.lowest_price
    if lowest is None:
        raise ValueError("frivolous rule is undefined for an auction without winners")
    winners = set(final_allocation.winner_ids())
    valid, frivolous = [], []
    for p in profiles:
        if p.bidder_id not in winners and is_frivolous(p.final_bid, lowest, fraction):
            frivolous.append(p)
        else:
            valid.append(p)
    return valid, frivolous
