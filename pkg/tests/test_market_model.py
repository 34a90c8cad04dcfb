from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import brute_force_allocation, config, soft_close_violations
from ecomlab.constants import SOFT_CLOSE_WINDOW_SECONDS
from ecomlab.market import (
    Allocation,
    Award,
    BidPoint,
    ConfigError,
    DatasetProvenance,
    SourceKind,
    StandingBook,
    allocate_winners,
    auction_end_time,
    format_money,
    from_iso,
    iso,
    min_required_bid,
    payment_schedule,
)

MIN = 60


# ------------------------------------------------------------- allocation


def test_eight_unit_lot_payments():
    bids = [BidPoint("A", 48900, 1, 10), BidPoint("B", 48900, 1, 20)]
    bids += [BidPoint(f"C{i}", 46900, 1, 30 + i) for i in range(6)]
    alloc = allocate_winners(bids, 8)
    assert alloc.units_allocated == 8
    assert [w.price for w in alloc.winners] == [48900, 48900] + [46900] * 6
    assert format_money(48900) == "$489.00"


def test_empty_bids_empty_allocation():
    alloc = allocate_winners([], 5)
    assert alloc.winners == () and alloc.units_allocated == 0 and alloc.lowest_price is None


def test_partial_fill_of_last_winner():
    alloc = allocate_winners([BidPoint("A", 5000, 2, 1), BidPoint("B", 4000, 2, 2)], 3)
    assert alloc.winners == (Award("A", 2, 5000), Award("B", 1, 4000))


def test_ties_go_to_earlier_then_larger():
    bids = [BidPoint("late", 100, 1, 5), BidPoint("early", 100, 1, 1)]
    assert allocate_winners(bids, 1).winner_ids() == ["early"]
    bids = [BidPoint("small", 100, 1, 1), BidPoint("big", 100, 2, 1)]
    assert allocate_winners(bids, 2).winners == (Award("big", 2, 100),)


bid_lists = st.lists(
    st.builds(
        BidPoint,
        bidder_id=st.sampled_from("ABCDEFGH"),
        price=st.integers(1, 6).map(lambda p: p * 100),
        quantity=st.integers(1, 3),
        placed_at=st.integers(0, 3),
    ),
    max_size=5,
    unique_by=lambda b: b.bidder_id,
)


@given(bid_lists, st.integers(1, 6))
def test_allocation_matches_enumeration(bids, lot):
    got = [(w.bidder_id, w.units, w.price) for w in allocate_winners(bids, lot).winners]
    assert got == brute_force_allocation(bids, lot)


@given(bid_lists, st.integers(1, 10))
def test_unit_conservation(bids, lot):
    alloc = allocate_winners(bids, lot)
    assert alloc.units_allocated == min(lot, sum(b.quantity for b in bids))
    # only the last winner may be cut short
    by_id = {b.bidder_id: b for b in bids}
    assert all(w.units == by_id[w.bidder_id].quantity for w in alloc.winners[:-1])


def test_bid_validation():
    with pytest.raises(ValueError):
        BidPoint("A", 0, 1, 0)
    with pytest.raises(ValueError):
        BidPoint("A", 100, 0, 0)


# --------------------------------------------------------- minimum bid


def test_min_required_bid_examples():
    cfg = config(lot_size=2, starting_bid=900, bid_increment=500)
    assert min_required_bid(cfg, Allocation()) == 900
    full = allocate_winners([BidPoint("A", 2000, 1, 1), BidPoint("B", 2500, 1, 2)], 2)
    assert min_required_bid(cfg, full) == 2500
    half = allocate_winners([BidPoint("A", 2000, 1, 1)], 2)
    assert min_required_bid(cfg, half) == 900


def test_standing_book_rules():
    book = StandingBook(config(lot_size=1, starting_bid=900, bid_increment=500))
    assert not book.submit(BidPoint("A", 800, 1, 1))
    assert book.submit(BidPoint("A", 900, 1, 1))
    assert not book.submit(BidPoint("B", 1300, 1, 2))
    assert book.submit(BidPoint("B", 1400, 1, 2))
    # quantity may not shrink on a re-bid
    book2 = StandingBook(config(lot_size=3))
    assert book2.submit(BidPoint("A", 900, 2, 1))
    assert not book2.submit(BidPoint("A", 1000, 1, 2))


# ------------------------------------------------------------ soft close


def test_soft_close_examples():
    cfg = config(scheduled_close=10_000)
    assert auction_end_time(cfg, []) == 10_000
    assert auction_end_time(cfg, [10_000 - 6 * MIN]) == 10_000
    assert auction_end_time(cfg, [10_000 - 2 * MIN]) == 10_000 + 3 * MIN
    assert auction_end_time(cfg, [10_000 - 2 * MIN, 10_000 + MIN]) == 10_000 + 6 * MIN
    assert cfg.soft_close_window == SOFT_CLOSE_WINDOW_SECONDS == 5 * MIN


@given(st.lists(st.integers(5_000, 12_000), max_size=15, unique=True))
def test_soft_close_invariants(times):
    cfg = config(scheduled_close=10_000)
    end = auction_end_time(cfg, times)
    assert soft_close_violations(end, 10_000, cfg.soft_close_window, sorted(times)) == []


# --------------------------------------------------------------- payment


def test_payment_examples():
    assert payment_schedule(Allocation((Award("A", 1, 48900), Award("B", 1, 46900)))) == [("A", 48900), ("B", 46900)]
    assert payment_schedule(Allocation((Award("A", 1, 900),))) == [("A", 900)]
    assert payment_schedule(Allocation((Award("A", 2, 5000),))) == [("A", 10000)]


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kw",
    [
        {"lot_size": 0},
        {"bid_increment": 0},
        {"starting_bid": -1},
        {"scheduled_open": 10, "scheduled_close": 10},
        {"soft_close_window": 0},
    ],
)
def test_auction_config_rejects(kw):
    with pytest.raises(ConfigError):
        config(**kw)


def test_iso_round_trip_and_provenance():
    assert iso(0) == "1970-01-01T00:00:00Z"
    assert from_iso(iso(1117584000)) == 1117584000
    p = DatasetProvenance("Simulation", 5, "me")
    assert p.source_kind is SourceKind.SIMULATION
    with pytest.raises(ValueError):
        DatasetProvenance("Rumour", 5, "me")


@given(st.integers(-10**9, 10**9))
def test_money_format(cents):
    text = format_money(cents)
    assert text.startswith("-$" if cents < 0 else "$")
    assert text.endswith(f".{abs(cents) % 100:02d}")
