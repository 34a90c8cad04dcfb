from __future__ import annotations

import time
from datetime import date, time as dtime

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecomlab.harvester import (
    ArchiveStore,
    FetchStatus,
    GapRecord,
    HostRateLimiter,
    HttpClient,
    LocalClient,
    PlanningError,
    RawDocument,
    RetryPolicy,
    Target,
    TokenBucket,
    Watchlist,
    capture_series,
    fetch,
    harvest_parallel,
    looks_garbled,
    plan_schedule,
    update_watchlist,
)
from ecomlab.simulator.build import MarketSettings, build_market
from ecomlab.simulator.service import serve

NO_WAIT = RetryPolicy(max_retries=2, base_delay=0.0)


def no_sleep(_s: float) -> None:
    pass


@pytest.fixture
def market():
    return build_market(MarketSettings(auctions=3, lot_range=(2, 4), bidder_range=(8, 15)), seed=21)


# --------------------------------------------------------------- scheduling


@given(st.dates(date(2000, 1, 1), date(2030, 1, 1)), st.integers(0, 10**6))
def test_full_day_window(day, seed):
    plan = plan_schedule(day, None, Watchlist(frozenset({"a", "b", "c"})), seed)
    assert plan.trigger_time.date() == day
    assert sorted(plan.item_order) == ["a", "b", "c"]


def test_plan_is_reproducible_and_checked():
    wl = Watchlist(frozenset({"x", "y"}))
    window = (dtime(9), dtime(17))
    assert plan_schedule(date(2003, 5, 1), window, wl, 7) == plan_schedule(date(2003, 5, 1), window, wl, 7)
    with pytest.raises(PlanningError):
        plan_schedule(date(2003, 5, 1), window, Watchlist(), 7)
    with pytest.raises(PlanningError):
        plan_schedule(date(2003, 5, 1), (dtime(17), dtime(9)), wl, 7)


def test_watchlist_grows_only():
    chart = [f"album{i}" for i in range(100)]
    wl = update_watchlist(Watchlist(), chart, date(2003, 1, 6))
    assert len(wl) == 100
    wl2 = update_watchlist(wl, chart[1:] + ["new"], date(2003, 1, 13))
    assert "album0" in wl2 and "new" in wl2 and len(wl2) == 101
    assert wl2.added_on["album0"] == date(2003, 1, 6)
    assert update_watchlist(wl, chart, date(2003, 1, 20)) == wl


# ------------------------------------------------------------ rate limiting


def test_token_bucket_spacing_with_fake_clock():
    now = [0.0]

    def sleep(s):
        now[0] += s

    bucket = TokenBucket(5.0, clock=lambda: now[0], sleep=sleep, slack=0.0)
    stamps = []
    for _ in range(11):
        bucket.acquire()
        stamps.append(now[0])
    gaps = [b - a for a, b in zip(stamps, stamps[1:])]
    assert min(gaps) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        TokenBucket(0)


def test_ten_fetches_at_five_per_second(market):
    limiter = HostRateLimiter(5.0)
    with serve(market) as service:
        client = HttpClient(service.url)
        start = time.monotonic()
        for _ in range(10):
            assert isinstance(fetch(Target("t", "/auction/A0000"), client, limiter, NO_WAIT), RawDocument)
        elapsed = time.monotonic() - start
    assert elapsed >= 1.8


# ----------------------------------------------------------------- fetching


def test_fetch_ok(market):
    doc = fetch(Target("auction-A0000", "/auction/A0000"), LocalClient(market), retry=NO_WAIT, sleep=no_sleep)
    assert isinstance(doc, RawDocument) and doc.fetch_status is FetchStatus.OK and doc.attempt == 1


def test_fetch_retry_exhausted(market):
    market.inject("drop", 3)
    out = fetch(Target("auction-A0000", "/auction/A0000"), LocalClient(market), retry=NO_WAIT, sleep=no_sleep, at=100)
    assert isinstance(out, GapRecord)
    assert out.window == (100, 101) and "Timeout" in out.reason and "3 attempts" in out.reason


def test_fetch_recovers_after_error(market):
    market.inject("error", 2)
    doc = fetch(Target("a", "/auction/A0000"), LocalClient(market), retry=NO_WAIT, sleep=no_sleep)
    assert isinstance(doc, RawDocument) and doc.attempt == 3


def test_fetch_404_is_a_gap(market):
    out = fetch(Target("x", "/auction/nope"), LocalClient(market), retry=NO_WAIT, sleep=no_sleep, at=5)
    assert isinstance(out, GapRecord) and out.reason == "HTTP 404"


def test_garbled_detection(market):
    market.inject("garble")
    doc = fetch(Target("a", "/auction/A0000"), LocalClient(market), retry=NO_WAIT, sleep=no_sleep)
    assert doc.fetch_status is FetchStatus.GARBLED
    assert looks_garbled(b"") and looks_garbled(b"\xff\xfe")
    assert not looks_garbled(b"<html><body>x</body></html>")


def test_retry_delays_double():
    assert RetryPolicy(3, 0.5, 2.0).delays() == [0.5, 1.0, 2.0]


def test_raw_document_contract():
    with pytest.raises(ValueError):
        RawDocument("t", 0, b"", FetchStatus.OK, 1)
    with pytest.raises(ValueError):
        GapRecord("t", (5, 5), "x")


# ------------------------------------------------------------------ capture


def test_interval_capture_count():
    m = build_market(MarketSettings(auctions=1, bidder_range=(0, 0), duration_days=(1, 1)), seed=2)
    log = m.auctions["A0000"]
    step = log.auction.duration // 10
    res = capture_series(Target("a", "/auction/A0000"), LocalClient(m), "A0000", log.auction.scheduled_open, interval=step)
    assert len(res.documents) in (10, 11) and not res.gaps


def test_capture_gaps_leave_rest_intact():
    m = build_market(MarketSettings(auctions=1, bidder_range=(0, 0), duration_days=(1, 1)), seed=2)
    log = m.auctions["A0000"]
    step = log.auction.duration // 10
    m.inject("drop", 2)
    res = capture_series(
        Target("a", "/auction/A0000"), LocalClient(m), "A0000", log.auction.scheduled_open, interval=step,
        retry=RetryPolicy(0), sleep=no_sleep,
    )
    assert len(res.gaps) == 2
    assert len(res.documents) + len(res.gaps) in (10, 11)
    assert all(d.fetch_status is FetchStatus.OK for d in res.documents)


def test_per_event_one_capture_per_accepted_bid(market):
    for aid, log in market.auctions.items():
        res = capture_series(Target(aid, f"/auction/{aid}"), LocalClient(market), aid, 0, per_event=True)
        assert len(res.documents) == len(log.accepted)


def test_interval_must_be_positive(market):
    with pytest.raises(ValueError):
        capture_series(Target("a", "/auction/A0000"), LocalClient(market), "A0000", 0, interval=0)


def test_parallel_preserves_order():
    assert harvest_parallel([lambda i=i: i for i in range(20)], workers=4) == list(range(20))


# ------------------------------------------------------------------ archive


def test_archive_is_append_only(tmp_path):
    store = ArchiveStore(tmp_path)
    d1 = RawDocument("t", 100, b"<html>a</html>", FetchStatus.OK, 1)
    d2 = RawDocument("t", 100, b"<html>b</html>", FetchStatus.OK, 2)
    p1 = store.put(d1)
    assert store.put(d1) == p1
    p2 = store.put(d2)
    assert p2 != p1 and p1.read_bytes() == d1.body
    assert list(store.documents("t")) == [d1, d2]
    gap = GapRecord("t", (100, 160), "Timeout")
    store.put_gap(gap)
    store.put_gap(gap)
    assert store.gaps("t") == [gap]
    assert store.targets() == ["t"]
