"""Event-driven Yankee auction simulation producing ground-truth logs."""

from __future__ import annotations

import bisect
import heapq
import json
import random
from dataclasses import dataclass, field

from ..market import (
    Allocation,
    AuctionConfig,
    BidPoint,
    Money,
    StandingBook,
    Timestamp,
    auction_end_time,
)
from .population import SimBidder

# delay before a follow-up bid: at least this many virtual seconds ...
REBID_MIN_DELAY = 60
# ... and at most this fraction of the scheduled duration
REBID_MAX_FRACTION = 0.04
# valuations are drawn as multiples of starting_bid * this markup
REFERENCE_MARKUP = 1.1


@dataclass(frozen=True)
class LoggedBid:
    bid: BidPoint
    accepted: bool


@dataclass
class GroundTruthLog:
    auction: AuctionConfig
    bids: list[LoggedBid]
    final_allocation: Allocation
    end_time: Timestamp
    archetypes: dict[str, str] = field(default_factory=dict)
    # (time, allocation after that accepted bid), chronological
    timeline: list[tuple[Timestamp, Allocation]] = field(default_factory=list, repr=False)

    @property
    def accepted(self) -> list[BidPoint]:
        return [lb.bid for lb in self.bids if lb.accepted]

    def allocation_at(self, t: Timestamp) -> Allocation:
        """Standing allocation as visible at virtual time ``t``."""
        i = bisect.bisect_right([ts for ts, _ in self.timeline], t)
        return self.timeline[i - 1][1] if i else Allocation()

    def change_times(self) -> list[Timestamp]:
        return [ts for ts, _ in self.timeline]

    def to_json(self) -> str:
        payload = {
            "auction_id": self.auction.auction_id,
            "lot_size": self.auction.lot_size,
            "starting_bid": self.auction.starting_bid,
            "bid_increment": self.auction.bid_increment,
            "scheduled_open": self.auction.scheduled_open,
            "scheduled_close": self.auction.scheduled_close,
            "end_time": self.end_time,
            "bids": [
                {
                    "bidder_id": lb.bid.bidder_id,
                    "price": lb.bid.price,
                    "quantity": lb.bid.quantity,
                    "placed_at": lb.bid.placed_at,
                    "accepted": lb.accepted,
                }
                for lb in self.bids
            ],
            "final_allocation": [[w.bidder_id, w.units, w.price] for w in self.final_allocation.winners],
            "archetypes": self.archetypes,
        }
        return json.dumps(payload, sort_keys=True)


def run_auction(
    config: AuctionConfig,
    population: list[SimBidder],
    seed: int,
    reference_price: Money | None = None,
) -> GroundTruthLog:
    """Simulate one auction to its soft close.

    Bidders enter at their drawn fraction of the scheduled duration and bid
    ``max(min required, opening_fraction * valuation)``. When pushed out of
    the winner set they rebid the minimum required (with their archetype's
    propensity) as long as it stays within valuation. Bid times are kept
    strictly increasing so each accepted bid has its own instant.
    """
    rng = random.Random(seed)
    reference = reference_price if reference_price is not None else round(REFERENCE_MARKUP * config.starting_bid)
    book = StandingBook(config)
    by_id = {b.bidder_id: b for b in population}
    valuations = {b.bidder_id: b.valuation(reference) for b in population}
    quantities = {b.bidder_id: min(b.quantity, config.lot_size) for b in population}

    queue: list[tuple[int, int, str, str]] = []
    seq = 0
    for b in sorted(population, key=lambda b: b.bidder_id):
        t = config.scheduled_open + int(b.entry_fraction * config.duration)
        heapq.heappush(queue, (t, seq, "entry", b.bidder_id))
        seq += 1

    log: list[LoggedBid] = []
    timeline: list[tuple[Timestamp, Allocation]] = []
    accepted_times: list[Timestamp] = []
    last_time = config.scheduled_open - 1
    current_end = config.scheduled_close
    standing = book.allocation()

    while queue:
        t, _, kind, bidder_id = heapq.heappop(queue)
        t = max(t, last_time + 1)
        if t >= current_end:
            break
        bidder = by_id[bidder_id]
        winners = set(standing.winner_ids())
        if bidder_id in winners:
            continue
        need = book.min_required()
        value = valuations[bidder_id]
        if kind == "entry":
            price = max(need, int(round(bidder.archetype.opening_fraction * value)))
            if price > value:
                price = value
        else:
            if need > value:
                continue
            price = need
        if price <= 0:
            continue
        bid = BidPoint(bidder_id, price, quantities[bidder_id], t)
        ok = book.submit(bid)
        log.append(LoggedBid(bid, ok))
        last_time = t
        if not ok:
            continue
        accepted_times.append(t)
        current_end = auction_end_time(config, accepted_times)
        new_standing = book.allocation()
        timeline.append((t, new_standing))
        displaced = winners - set(new_standing.winner_ids())
        standing = new_standing
        for loser in sorted(displaced):
            arch = by_id[loser].archetype
            if rng.random() < arch.rebid_propensity:
                delay = rng.randint(REBID_MIN_DELAY, max(2 * REBID_MIN_DELAY, int(REBID_MAX_FRACTION * config.duration)))
                heapq.heappush(queue, (t + delay, seq, "rebid", loser))
                seq += 1

    return GroundTruthLog(
        auction=config,
        bids=log,
        final_allocation=standing,
        end_time=auction_end_time(config, accepted_times),
        archetypes={b.bidder_id: b.kind.value for b in population},
        timeline=timeline,
    )
