"""Shared fixtures and independent oracles for the test suite.

Oracles here are written from the rule statements, not from the code
under test, so a test compares two separate implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from ecomlab.extractor import Malformed, RecordKind, extract_auction, load_rules
from ecomlab.harvester import LocalClient, Target, capture_series
from ecomlab.market import AuctionConfig, BidPoint, ProductInfo
from ecomlab.records import AuctionSnapshot, WinnerRow
from ecomlab.simulator.auction import GroundTruthLog

AUCTION_RULES = load_rules(RecordKind.AUCTION_PAGE)


def config(
    lot_size: int = 1,
    starting_bid: int = 900,
    bid_increment: int = 500,
    scheduled_open: int = 0,
    scheduled_close: int = 86_400,
    auction_id: str = "A1",
    **kw,
) -> AuctionConfig:
    return AuctionConfig(
        auction_id,
        lot_size,
        starting_bid,
        bid_increment,
        scheduled_open,
        scheduled_close,
        ProductInfo("Laser printer", "Computers", "New", "current"),
        **kw,
    )


def snap(t: int, winners=(), auction_id: str = "A1", lot_size: int = 8, closed: bool = False) -> AuctionSnapshot:
    """A snapshot from (bidder, price[, quantity]) tuples."""
    rows = tuple(WinnerRow(w[0], w[1], w[2] if len(w) > 2 else 1) for w in winners)
    return AuctionSnapshot(
        auction_id, t, ProductInfo("Laser printer", "Computers", "New", "current"), 100, lot_size, rows, closed=closed
    )


# ----------------------------------------------------------- truth oracles


@dataclass(frozen=True)
class TrueProfile:
    entry_time: int
    exit_time: int
    bid_count: int
    final_bid: int


def visible_bids(log: GroundTruthLog) -> list[BidPoint]:
    """Accepted bids that put their bidder in the winner set at placement."""
    out = []
    for bid in log.accepted:
        if bid.bidder_id in log.allocation_at(bid.placed_at).winner_ids():
            out.append(bid)
    return out


def truth_profiles(log: GroundTruthLog) -> dict[str, TrueProfile]:
    per: dict[str, list[BidPoint]] = {}
    for bid in visible_bids(log):
        per.setdefault(bid.bidder_id, []).append(bid)
    return {
        b: TrueProfile(bids[0].placed_at, bids[-1].placed_at, len(bids), bids[-1].price)
        for b, bids in per.items()
    }


def capture_snapshots(market, auction_id: str, per_event: bool = True, interval: int | None = None):
    """Harvest one auction in-process and extract every page."""
    client = LocalClient(market)
    log = market.auctions[auction_id]
    result = capture_series(
        Target(f"auction-{auction_id}", f"/auction/{auction_id}"),
        client,
        auction_id,
        start=log.auction.scheduled_open,
        interval=interval,
        per_event=per_event,
    )
    snaps = []
    for doc in result.documents:
        rec = extract_auction(doc, AUCTION_RULES)
        assert not isinstance(rec, Malformed), rec
        snaps.append(rec)
    return snaps, result


# -------------------------------------------------------------- rule oracles


def sampling_loss_oracle(winner_sets: list[set[str]]) -> bool:
    for a, b in zip(winner_sets, winner_sets[1:]):
        if a and b and not (a & b):
            return True
    return False


def frivolous_oracle(final_bid: int, lowest_winning: int, is_winner: bool) -> bool:
    return (not is_winner) and Fraction(final_bid) < Fraction(4, 5) * lowest_winning


def ranks_above(a: BidPoint, b: BidPoint) -> bool:
    """Does bid ``a`` rank strictly above ``b``? Stated pairwise, not as a sort key."""
    if a.price != b.price:
        return a.price > b.price
    if a.placed_at != b.placed_at:
        return a.placed_at < b.placed_at
    if a.quantity != b.quantity:
        return a.quantity > b.quantity
    return a.bidder_id < b.bidder_id


def brute_force_allocation(bids: list[BidPoint], lot_size: int) -> list[tuple[str, int, int]]:
    """Enumerate every award vector and keep the one consistent with the ranking.

    A vector is admissible when it awards min(lot, total demand) units and
    no bid receives anything while a higher-ranked bid is short. Exactly one
    vector qualifies; it is returned as (bidder, units, price) in rank order.
    """
    demand = sum(b.quantity for b in bids)
    target = min(lot_size, demand)
    found = []
    for vec in product(*[range(b.quantity + 1) for b in bids]):
        if sum(vec) != target:
            continue
        ok = True
        for i, bi in enumerate(bids):
            for j, bj in enumerate(bids):
                if vec[j] > 0 and ranks_above(bi, bj) and vec[i] < bi.quantity:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            found.append(vec)
    assert len(found) == 1, f"{len(found)} admissible award vectors"
    awarded = [(b, u) for b, u in zip(bids, found[0]) if u > 0]
    # order winners by pairwise rank (insertion sort, independent of sort keys)
    ordered: list[tuple[BidPoint, int]] = []
    for b, u in awarded:
        i = 0
        while i < len(ordered) and ranks_above(ordered[i][0], b):
            i += 1
        ordered.insert(i, (b, u))
    return [(b.bidder_id, u, b.price) for b, u in ordered]


def soft_close_violations(end: int, close: int, window: int, times: list[int]) -> list[str]:
    problems = []
    if end < close:
        problems.append("ends before scheduled close")
    live = [t for t in times if t <= end]
    if any(end - window < t <= end for t in live):
        problems.append("bid inside trailing window")
    # minimality: any earlier candidate end must itself be blocked
    if end != close and (end - window) not in live:
        problems.append("end is not close or last bid + window")
    return problems
