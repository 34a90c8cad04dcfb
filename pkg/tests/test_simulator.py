from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import config
from ecomlab.market import ConfigError, auction_end_time, iso
from ecomlab.simulator.auction import run_auction
from ecomlab.simulator.build import MarketSettings, build_market
from ecomlab.simulator.p2p import default_albums, gen_p2p_corpus
from ecomlab.simulator.population import (
    DEFAULT_ARCHETYPES,
    ArchetypeKind,
    BidderArchetype,
    proportional_counts,
    spawn_population,
)
from ecomlab.simulator.retail import RetailParams, gen_retail_market
from ecomlab.simulator.service import DroppedResponse, SimulatedMarket, auction_page_state
from ecomlab.simulator.templates import AUCTION_TEMPLATE, PageTemplate, RenderError, TemplateError, render_page

MIX = {"EarlyMultiple": 0.4, "EarlySingle": 0.3, "LateArriver": 0.3}


# ------------------------------------------------------------ population


def test_mix_counts_are_exact():
    pop = spawn_population(MIX, 100, seed=1)
    counts = {k: sum(b.kind.value == k for b in pop) for k in MIX}
    assert counts == {"EarlyMultiple": 40, "EarlySingle": 30, "LateArriver": 30}


def test_population_deterministic_and_unique_ids():
    a, b = spawn_population(MIX, 57, seed=9), spawn_population(MIX, 57, seed=9)
    assert a == b
    assert len({x.bidder_id for x in a}) == 57


def test_mix_must_sum_to_one():
    with pytest.raises(ConfigError):
        spawn_population({"EarlyMultiple": 0.5, "EarlySingle": 0.2, "LateArriver": 0.2}, 10, seed=0)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5), st.integers(0, 500))
def test_proportional_counts_conserve_total(weights, n):
    total = sum(weights)
    fractions = [w / total for w in weights]
    counts = proportional_counts(fractions, n)
    assert sum(counts) == n
    assert all(abs(c - f * n) < 1 + 1e-9 for c, f in zip(counts, fractions))


def test_archetype_contracts():
    with pytest.raises(ConfigError):
        BidderArchetype(ArchetypeKind.LATE_ARRIVER, (0.5, 1.0), 0.0, (1.0, 1.2))
    with pytest.raises(ConfigError):
        BidderArchetype(ArchetypeKind.EARLY_SINGLE, (0.0, 0.3), 0.5, (1.0, 1.2))
    with pytest.raises(ConfigError):
        BidderArchetype(ArchetypeKind.EARLY_MULTIPLE, (0.4, 0.2), 1.0, (1.0, 1.2))


# --------------------------------------------------------------- auctions


def test_no_bidders_ends_at_close():
    cfg = config(scheduled_close=86_400)
    log = run_auction(cfg, [], seed=0)
    assert log.bids == [] and log.end_time == 86_400 and log.final_allocation.winners == ()


def test_auction_is_deterministic():
    cfg = config(lot_size=3)
    pop = spawn_population(MIX, 20, seed=4)
    assert run_auction(cfg, pop, seed=5).to_json() == run_auction(cfg, pop, seed=5).to_json()


def test_late_arrivers_bid_late():
    cfg = config(lot_size=2, scheduled_close=86_400)
    pop = spawn_population({"LateArriver": 1.0}, 25, seed=3)
    log = run_auction(cfg, pop, seed=3)
    assert log.accepted
    assert all(b.placed_at >= 0.8 * cfg.duration for b in log.accepted)


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.integers(1, 8), st.integers(0, 30))
def test_log_is_consistent_with_mechanics(seed, lot, n):
    cfg = config(lot_size=lot)
    log = run_auction(cfg, spawn_population(MIX, n, seed=seed), seed=seed)
    times = [b.placed_at for b in log.accepted]
    assert times == sorted(set(times))
    assert log.end_time == auction_end_time(cfg, times)
    assert all(t < log.end_time for t in times)
    assert log.allocation_at(log.end_time) == log.final_allocation
    assert log.final_allocation.units_allocated <= lot


def test_ground_truth_json_is_parseable():
    log = run_auction(config(lot_size=2), spawn_population(MIX, 10, seed=1), seed=1)
    payload = json.loads(log.to_json())
    assert payload["auction_id"] == "A1" and len(payload["bids"]) == len(log.bids)


# ---------------------------------------------------------------- templates


def test_render_substitutes_winners():
    log = run_auction(config(lot_size=8), [], seed=0)
    state = auction_page_state(log, 0)
    state["winners"] = [
        {"bidder_id": "A", "price": "$489.00", "quantity": 1},
        {"bidder_id": "B", "price": "$469.00", "quantity": 1},
    ]
    page = render_page(state, AUCTION_TEMPLATE)
    assert '<tr><td class="who">A</td>' in page and "$489.00" in page and "$469.00" in page


def test_template_rejects_unanchored_placeholder():
    with pytest.raises(TemplateError):
        PageTemplate("bad", "<p>{{x}}</p>", {})
    with pytest.raises(TemplateError):
        PageTemplate("bad", "<p>{{x}}</p>", {"x": ("<b>", "</b>")})


def test_render_missing_value():
    t = PageTemplate("t", "<p>{{x}}</p>", {"x": ("<p>", "</p>")})
    with pytest.raises(RenderError):
        render_page({}, t)
    assert render_page({"x": "<b>&"}, t) == "<p>&lt;b&gt;&amp;</p>"


# ------------------------------------------------------------------ service


@pytest.fixture(scope="module")
def small_market():
    return build_market(MarketSettings(auctions=2, albums=2, retail_categories=1), seed=5)


def test_live_and_closed_pages(small_market):
    aid = sorted(small_market.auctions)[0]
    log = small_market.auctions[aid]
    small_market.advance_to(log.auction.scheduled_open, aid)
    live = small_market.handle(f"/auction/{aid}")
    assert live.status == 200 and b"Auction open" in live.body
    small_market.advance_to(log.end_time, aid)
    done = small_market.handle(f"/auction/{aid}")
    assert b"Auction closed" in done.body
    assert iso(log.end_time).encode() in done.body


def test_failure_injection():
    m = SimulatedMarket(auctions=build_market(MarketSettings(auctions=1), seed=1).auctions)
    m.inject("drop", 2)
    for _ in range(2):
        with pytest.raises(DroppedResponse):
            m.handle("/auction/A0000")
    assert m.handle("/auction/A0000").status == 200
    m.inject("error")
    assert m.handle("/auction/A0000").status == 503
    with pytest.raises(ValueError):
        m.inject("explode")
    assert m.handle("/nowhere").status == 404


def test_control_paths(small_market):
    assert small_market.handle("/control/targets").status == 200
    assert small_market.handle("/control/clock?t=zz").status == 400
    info = json.loads(small_market.handle("/control/targets").body)
    assert set(info) == set(small_market.targets())


def test_dump_writes_pages(tmp_path, small_market):
    n = small_market.dump(tmp_path)
    pages = list(tmp_path.rglob("*.html"))
    assert n == len(pages) > 0
    assert (tmp_path / "search" / "truth.json").exists()


# ---------------------------------------------------------------------- p2p


def test_p2p_corpus():
    albums = default_albums(3)
    empty = gen_p2p_corpus(albums[:1], 0, seed=1)
    assert empty.rows["alb000"] == [] and "<table" in empty.documents["alb000"]
    counts = {"alb000": 5, "alb001": 0, "alb002": 12}
    c1, c2 = gen_p2p_corpus(albums, counts, seed=2), gen_p2p_corpus(albums, counts, seed=2)
    assert c1.documents == c2.documents
    assert sum(len(r) for r in c1.rows.values()) == sum(counts.values())


# ------------------------------------------------------------------- retail


def test_retail_counts():
    m = gen_retail_market(8, 50, 20, seed=1, quotes_per_product=7)
    assert len(m.products) == 160 and len(m.quotes) == 1120
    assert len(m.product_pages) == 160 and len(m.retailer_pages) == 50


def test_retail_rating_rate_zero():
    m = gen_retail_market(2, 30, 5, seed=1, params=RetailParams(p_unrated=0.0))
    assert all(r.ratings is not None for r in m.retailers)


def test_default_archetypes_valid():
    assert set(DEFAULT_ARCHETYPES) == set(ArchetypeKind)
