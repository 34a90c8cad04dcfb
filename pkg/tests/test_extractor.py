from __future__ import annotations

from datetime import date, timedelta

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ecomlab.extractor import (
    Malformed,
    RecordKind,
    RuleCompileError,
    compile_rules,
    extract,
    extract_auction,
    extract_quotes,
    extract_search,
    load_rules,
    parse_money,
)
from ecomlab.harvester import FetchStatus, RawDocument
from ecomlab.market import Condition, ProductInfo, format_money, iso
from ecomlab.records import AuctionSnapshot, PriceQuote, Ratings, RetailerProfile, SearchObservation, WinnerRow
from ecomlab.simulator.retail import Product, product_page_state, retailer_page_state
from ecomlab.simulator.templates import (
    AUCTION_TEMPLATE,
    PRODUCT_QUOTES_TEMPLATE,
    RETAILER_TEMPLATE,
    SEARCH_TEMPLATE,
    render_page,
)

AUCTION = load_rules(RecordKind.AUCTION_PAGE)
SEARCH = load_rules(RecordKind.SEARCH_RESULTS)
QUOTES = load_rules(RecordKind.QUOTE_PAGE)
ROUND_TRIPS = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def doc(page: str, t: int = 1_000_000) -> RawDocument:
    return RawDocument("t", t, page.encode("utf-8"), FetchStatus.OK, 1)


# free text, including characters that look like markup
text = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30)
money = st.integers(1, 10**8)
times = st.integers(0, 2**31 - 1)


# ------------------------------------------------------------------- rules


def test_minimal_rule_set():
    spec = 'kind: QuotePage\nlisting_kind := "<k>" ... "</k>"\nlisting_id := "<i>" ... "</i>"\nextra := "<x>" ... "</x>"\n'
    rules = compile_rules(spec)
    assert len(rules.field_rules) == 3 and rules.name == "QuotePage"


def test_missing_required_rule_names_field():
    with pytest.raises(RuleCompileError, match="listing_id"):
        compile_rules('kind: QuotePage\nlisting_kind := "<k>" ... "</k>"\n')


def test_repeat_rules_form_groups():
    assert [r.field for r in AUCTION.groups()["winners"]] == ["bidder_id", "price", "quantity"]


@pytest.mark.parametrize(
    "spec",
    [
        'listing_kind := "<k>" ... "</k>"',
        'kind: Nonsense',
        'kind: QuotePage\nlisting_kind = "<k>" "</k>"',
        'kind: QuotePage\nlisting_kind := "" ... "</k>"\nlisting_id := "<i>" ... "</i>"',
        'kind: QuotePage\nlisting_kind := "<k>" ... "</k>"\nlisting_id := "<k>" ... "</i>"',
        'kind: QuotePage\nlisting_kind := "<k>" ... "</k>" sometimes',
        'kind: QuotePage\nlisting_kind := "<k ... "</k>"',
    ],
)
def test_bad_rule_files(spec):
    with pytest.raises(RuleCompileError):
        compile_rules(spec)


def test_rule_set_kind_must_match():
    with pytest.raises(ValueError):
        extract_auction(doc("<html></html>"), QUOTES)


# ----------------------------------------------------------------- auctions


def auction_state(winners, lot=8, status="open") -> dict:
    return {
        "status": status,
        "auction_id": "A0042",
        "title": "Laser printer",
        "category": "Computer hardware",
        "condition": "New",
        "life_cycle": "current",
        "lot_size": lot,
        "min_required_bid": format_money(47400),
        "bid_increment": format_money(500),
        "scheduled_open": iso(0),
        "scheduled_close": iso(86_400),
        "ends": iso(86_400),
        "winners": [{"bidder_id": b, "price": format_money(p), "quantity": q} for b, p, q in winners],
    }


def test_eight_unit_lot_page():
    winners = [("ann", 48900, 1), ("bob", 48900, 1)] + [(f"c{i}", 46900, 1) for i in range(6)]
    snap = extract_auction(doc(render_page(auction_state(winners), AUCTION_TEMPLATE)), AUCTION)
    assert snap.lot_size == 8
    assert [(w.price, w.quantity) for w in snap.winners] == [(48900, 1)] * 2 + [(46900, 1)] * 6


def test_no_winners_is_legal():
    snap = extract_auction(doc(render_page(auction_state([]), AUCTION_TEMPLATE)), AUCTION)
    assert isinstance(snap, AuctionSnapshot) and snap.winners == ()


def test_stripped_anchor_is_malformed():
    page = render_page(auction_state([]), AUCTION_TEMPLATE).replace('<td class="lot">', "<td>")
    out = extract_auction(doc(page), AUCTION)
    assert isinstance(out, Malformed) and out.field == "lot_size" and "lot_size" in out.reason


def test_ragged_rows_are_malformed():
    page = render_page(auction_state([("a", 100, 1)]), AUCTION_TEMPLATE).replace('<td class="qty">', "<td>", 1)
    out = extract_auction(doc(page), AUCTION)
    assert isinstance(out, Malformed) and "ragged" in out.reason


def test_undecodable_is_malformed():
    out = extract_auction(RawDocument("t", 0, b"\xff\xfe\x00", FetchStatus.GARBLED, 1), AUCTION)
    assert isinstance(out, Malformed) and "undecodable" in out.reason


@ROUND_TRIPS
@given(
    aid=text, title=text, category=text, lot=st.integers(1, 500), minbid=money, incr=money,
    opened=times, closing=times, ends=times, status=st.sampled_from(["open", "closed"]),
    condition=st.sampled_from(list(Condition)),
    winners=st.lists(st.tuples(text, money, st.integers(1, 50)), max_size=8), t=times,
)
def test_auction_round_trip(aid, title, category, lot, minbid, incr, opened, closing, ends, status, condition, winners, t):
    state = {
        "status": status, "auction_id": aid, "title": title, "category": category, "condition": condition.value,
        "life_cycle": "end-of-life", "lot_size": lot, "min_required_bid": format_money(minbid),
        "bid_increment": format_money(incr), "scheduled_open": iso(opened), "scheduled_close": iso(closing),
        "ends": iso(ends),
        "winners": [{"bidder_id": b, "price": format_money(p), "quantity": q} for b, p, q in winners],
    }
    want = AuctionSnapshot(
        aid, t, ProductInfo(title, category, condition, "end-of-life"), minbid, lot,
        tuple(WinnerRow(b, p, q) for b, p, q in winners), incr, status == "closed", opened, closing, ends,
    )
    assert extract_auction(doc(render_page(state, AUCTION_TEMPLATE), t), AUCTION) == want


# ------------------------------------------------------------------- search


def search_row(i: int) -> dict:
    return {
        "sharer_id": f"user{i}", "file_title": f"Artist - Track {i}.mp3", "album_match": "yes",
        "file_size": 4_000_000 + i, "bitrate": 128, "track_length": 200, "connection_class": "DSL",
        "sample_rate": 44100, "queue": "0/5",
    }


def test_twelve_rows_and_header_only():
    page = render_page({"query_album": "alb1", "searched_at": iso(0), "rows": [search_row(i) for i in range(12)]},
                       SEARCH_TEMPLATE)
    assert len(extract_search(doc(page), SEARCH)) == 12
    empty = render_page({"query_album": "alb1", "searched_at": iso(0), "rows": []}, SEARCH_TEMPLATE)
    assert extract_search(doc(empty), SEARCH) == []


search_rows = st.lists(
    st.fixed_dictionaries(
        {
            "sharer_id": text, "file_title": text, "album_match": st.booleans(),
            "file_size": st.integers(0, 10**10), "bitrate": st.integers(0, 2000), "track_length": st.integers(0, 10**5),
            "connection_class": text, "sample_rate": st.integers(8000, 96000), "queue": text,
        }
    ),
    max_size=10,
)


@ROUND_TRIPS
@given(album=text, rows=search_rows, t=times)
def test_search_round_trip(album, rows, t):
    page_rows = [{**r, "album_match": "yes" if r["album_match"] else "no"} for r in rows]
    page = render_page({"query_album": album, "searched_at": iso(t), "rows": page_rows}, SEARCH_TEMPLATE)
    want = [
        SearchObservation(
            t, album, r["sharer_id"], r["file_title"], r["album_match"], r["file_size"], r["bitrate"],
            r["track_length"], r["connection_class"], {"queue": r["queue"], "sample_rate": str(r["sample_rate"])},
        )
        for r in rows
    ]
    assert extract_search(doc(page, t), SEARCH) == want


# ------------------------------------------------------------------- quotes


def test_seven_quotes_with_conditions():
    conds = [Condition.NEW] * 5 + [Condition.REFURBISHED] * 2
    qs = [PriceQuote(f"r{i}", "p1", "Books", 1000 + i, c, 5) for i, c in enumerate(conds)]
    page = render_page(product_page_state(Product("p1", "A book", "Books"), qs), PRODUCT_QUOTES_TEMPLATE)
    got, profile = extract_quotes(doc(page, 5), QUOTES)
    assert got == qs and profile is None


def _retailer(rated: bool) -> RetailerProfile:
    end = date(2005, 5, 30)
    return RetailerProfile(
        "r9",
        Ratings(9.1, 8.2, 7.3, 9.9) if rated else None,
        45 if rated else 0,
        (end - timedelta(days=90), end) if rated else None,
        12,
        frozenset({"CT", "NY"}),
        None,
        True,
        False,
    )


@pytest.mark.parametrize("rated", [True, False])
def test_retailer_fragment(rated):
    page = render_page(retailer_page_state(_retailer(rated)), RETAILER_TEMPLATE)
    quotes, profile = extract_quotes(doc(page), QUOTES)
    assert quotes == [] and profile == _retailer(rated)


@ROUND_TRIPS
@given(
    pid=text, title=text, category=text, t=times,
    offers=st.lists(st.tuples(text, money, st.sampled_from(list(Condition))), max_size=12),
)
def test_quote_round_trip(pid, title, category, t, offers):
    qs = [PriceQuote(r, pid, category, p, c, t) for r, p, c in offers]
    page = render_page(product_page_state(Product(pid, title, category), qs), PRODUCT_QUOTES_TEMPLATE)
    assert extract_quotes(doc(page, t), QUOTES) == (qs, None)


# ------------------------------------------------------------------- values


@pytest.mark.parametrize(
    "text_in,cents", [("$1,234.56", 123456), ("1234.5", 123450), ("-$5", -500), ("$0.07", 7), ("12", 1200)]
)
def test_parse_money(text_in, cents):
    assert parse_money(text_in) == cents


@pytest.mark.parametrize("bad", ["", "$", "1,23", "$1.234", "abc", "1e5"])
def test_parse_money_rejects(bad):
    with pytest.raises(ValueError):
        parse_money(bad)


@given(st.integers(-10**12, 10**12))
def test_money_round_trip(cents):
    assert parse_money(format_money(cents)) == cents


@settings(max_examples=300)
@given(st.binary(max_size=400))
def test_arbitrary_bytes_never_crash(body):
    for rules in (AUCTION, SEARCH, QUOTES):
        out = extract(RawDocument("f", 0, body, FetchStatus.OK if body else FetchStatus.GARBLED, 1), rules)
        assert isinstance(out, (Malformed, AuctionSnapshot, list, tuple))
