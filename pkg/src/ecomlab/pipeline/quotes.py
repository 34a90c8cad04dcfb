"""Retailer classification, rating validity and the analyzable-quote filter."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from typing import Iterable, Mapping, Sequence

from ..constants import MIN_PRODUCTS_PER_CATEGORY, MIN_QUOTES_PER_PRODUCT, MIN_SURVEYS, RATING_WINDOW_DAYS
from ..market import Condition
from ..records import ChannelClass, PriceQuote, RetailerProfile

# how stale a ratings window may be, in days, and still count as current
WINDOW_FRESHNESS_DAYS = 7
# slack on the window length for inclusive vs exclusive day counting
WINDOW_LENGTH_SLACK_DAYS = 1


def classify_channel(store_states: Iterable[str], catalog: bool) -> tuple[ChannelClass, bool]:
    """Stores in more than one state make a national chain, one state a local store."""
    n = len(set(store_states))
    if n > 1:
        return ChannelClass.NATIONAL_BRICK_N_CLICK, catalog
    if n == 1:
        return ChannelClass.LOCAL_BRICK_N_CLICK, catalog
    return ChannelClass.PURE_PLAY, catalog


def with_channel(profile: RetailerProfile) -> RetailerProfile:
    channel, catalog = classify_channel(profile.store_states, profile.catalog)
    return replace(profile, channel=channel, catalog=catalog)


def validate_rating(
    profile: RetailerProfile | None,
    as_of: date,
    min_surveys: int = MIN_SURVEYS,
    window_days: int = RATING_WINDOW_DAYS,
    freshness_days: int = WINDOW_FRESHNESS_DAYS,
) -> bool:
    """Ratings count only with enough surveys over a current window of the right length."""
    if profile is None or profile.ratings is None or profile.ratings_window is None:
        return False
    if profile.survey_count < min_surveys:
        return False
    start, end = profile.ratings_window
    if abs((end - start).days - window_days) > WINDOW_LENGTH_SLACK_DAYS:
        return False
    return 0 <= (as_of - end).days <= freshness_days


@dataclass(frozen=True)
class Thresholds:
    min_quotes_per_product: int = MIN_QUOTES_PER_PRODUCT
    min_products_per_category: int = MIN_PRODUCTS_PER_CATEGORY

    def __post_init__(self) -> None:
        if self.min_quotes_per_product < 1 or self.min_products_per_category < 1:
            raise ValueError("thresholds must be >= 1")


@dataclass(frozen=True)
class CategoryTally:
    category: str
    posted_prices_collected: int
    posted_prices_analyzed: int
    retailers_collected: int
    retailers_analyzed: int
    products_collected: int
    products_analyzed: int

    def table_row(self) -> dict:
        """Row in the collected-vs-analyzed report layout."""
        return {
            "category": self.category,
            "posted_prices_collected": self.posted_prices_collected,
            "posted_prices_analyzed": self.posted_prices_analyzed,
            "retailers_collected": self.retailers_collected,
            "retailers_analyzed": self.retailers_analyzed,
            "products": self.products_collected,
        }


TALLY_COLUMNS = (
    "category",
    "posted_prices_collected",
    "posted_prices_analyzed",
    "retailers_collected",
    "retailers_analyzed",
    "products",
)


@dataclass
class AnalyzableQuoteSet:
    quotes: list[PriceQuote]
    tallies: list[CategoryTally] = field(default_factory=list)
    dropped: dict[str, int] = field(default_factory=dict)

    def totals(self) -> dict:
        keys = TALLY_COLUMNS[1:]
        rows = [t.table_row() for t in self.tallies]
        return {k: sum(r[k] for r in rows) for k in keys}


def filter_quotes(
    quotes: Sequence[PriceQuote],
    profiles: Mapping[str, RetailerProfile],
    as_of: date,
    thresholds: Thresholds = Thresholds(),
) -> AnalyzableQuoteSet:
    """Apply the five rules in fixed order and tally what survives.

    1. condition is New; 2. retailer is not a refurbished/discount outlet;
    3. retailer has a valid rating; 4. product keeps enough quotes;
    5. category keeps enough products. Steps 4 and 5 count survivors of
    the earlier steps, so the order changes the result.
    """
    dropped = {"condition": 0, "refurb_discounter": 0, "rating": 0, "product_threshold": 0, "category_threshold": 0}
    survivors = []
    for q in quotes:
        profile = profiles.get(q.retailer_id)
        if q.condition is not Condition.NEW:
            dropped["condition"] += 1
        elif profile is not None and profile.refurb_discounter:
            dropped["refurb_discounter"] += 1
        elif not validate_rating(profile, as_of):
            dropped["rating"] += 1
        else:
            survivors.append(q)

    per_product: dict[str, int] = {}
    for q in survivors:
        per_product[q.product_id] = per_product.get(q.product_id, 0) + 1
    kept = [q for q in survivors if per_product[q.product_id] >= thresholds.min_quotes_per_product]
    dropped["product_threshold"] = len(survivors) - len(kept)

    products_in: dict[str, set[str]] = {}
    for q in kept:
        products_in.setdefault(q.category, set()).add(q.product_id)
    final = [q for q in kept if len(products_in[q.category]) >= thresholds.min_products_per_category]
    dropped["category_threshold"] = len(kept) - len(final)

    return AnalyzableQuoteSet(final, tally(quotes, final), dropped)


def tally(collected: Sequence[PriceQuote], analyzed: Sequence[PriceQuote]) -> list[CategoryTally]:
    """Per-category collected and analyzed counts, sorted by category name."""

    def group(qs: Sequence[PriceQuote]) -> dict[str, list[PriceQuote]]:
        out: dict[str, list[PriceQuote]] = {}
        for q in qs:
            out.setdefault(q.category, []).append(q)
        return out

    col, ana = group(collected), group(analyzed)
    rows = []
    for cat in sorted(col):
        a = ana.get(cat, [])
        rows.append(
            CategoryTally(
                category=cat,
                posted_prices_collected=len(col[cat]),
                posted_prices_analyzed=len(a),
                retailers_collected=len({q.retailer_id for q in col[cat]}),
                retailers_analyzed=len({q.retailer_id for q in a}),
                products_collected=len({q.product_id for q in col[cat]}),
                products_analyzed=len({q.product_id for q in a}),
            )
        )
    return rows
