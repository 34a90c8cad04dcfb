"""Synthetic retail price-comparison market with planted data problems."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import date, timedelta

from ..constants import RATING_WINDOW_DAYS, RETAIL_CATEGORIES
from ..market import Condition, Timestamp, format_money
from ..records import PriceQuote, Ratings, RetailerProfile
from .templates import PRODUCT_QUOTES_TEMPLATE, RETAILER_TEMPLATE, render_page

STATES = ("CA", "CT", "FL", "IL", "MA", "NJ", "NY", "OH", "PA", "TX", "WA")


@dataclass(frozen=True)
class RetailParams:
    """Rates at which the generator plants records the quote filter must drop."""

    p_not_new: float = 0.08
    p_refurb_discounter: float = 0.08
    p_unrated: float = 0.12
    p_low_surveys: float = 0.05
    p_stale_window: float = 0.03
    p_brick: float = 0.4
    p_catalog: float = 0.2


@dataclass(frozen=True)
class Product:
    product_id: str
    title: str
    category: str


@dataclass
class RetailMarket:
    as_of: date
    captured_at: Timestamp
    products: list[Product]
    retailers: list[RetailerProfile]
    quotes: list[PriceQuote]
    product_pages: dict[str, str] = field(default_factory=dict)
    retailer_pages: dict[str, str] = field(default_factory=dict)

    def profiles(self) -> dict[str, RetailerProfile]:
        return {r.retailer_id: r for r in self.retailers}


def category_names(n: int) -> list[str]:
    names = list(RETAIL_CATEGORIES[:n])
    names += [f"Category {i + 1}" for i in range(len(names), n)]
    return names


def _retailer(i: int, rng: random.Random, params: RetailParams, as_of: date, n: int) -> RetailerProfile:
    rid = f"r{i:04d}"
    states: frozenset[str] = frozenset()
    if rng.random() < params.p_brick:
        states = frozenset(rng.sample(STATES, rng.choice((1, 1, 2, 3, 5))))
    ratings, surveys, window = None, 0, None
    if rng.random() >= params.p_unrated:
        ratings = Ratings(*(round(rng.uniform(4.0, 9.8), 1) for _ in range(4)))
        surveys = rng.randint(5, 29) if rng.random() < params.p_low_surveys else rng.randint(30, 600)
        lag = rng.randint(45, 120) if rng.random() < params.p_stale_window else rng.randint(0, 3)
        end = as_of - timedelta(days=lag)
        window = (end - timedelta(days=RATING_WINDOW_DAYS), end)
    return RetailerProfile(
        retailer_id=rid,
        ratings=ratings,
        survey_count=surveys,
        ratings_window=window,
        size_rank=rng.randint(1, 50 * n),
        store_states=states,
        catalog=rng.random() < params.p_catalog,
        refurb_discounter=rng.random() < params.p_refurb_discounter,
    )


def gen_retail_market(
    categories: int,
    retailers: int,
    products_per_category: int | tuple[int, int],
    seed: int,
    quotes_per_product: int | tuple[int, int] = 7,
    params: RetailParams = RetailParams(),
    as_of: date = date(2005, 6, 1),
    captured_at: Timestamp = 1117584000,
) -> RetailMarket:
    """Generate retailers, products and quotes, and render every page.

    Counts given as ``(lo, hi)`` tuples are drawn uniformly per category or
    per product. Each product is quoted by distinct retailers.
    """
    if categories < 1 or retailers < 1:
        raise ValueError("categories and retailers must be >= 1")
    rng = random.Random(seed)

    def draw(spec: int | tuple[int, int]) -> int:
        return rng.randint(*spec) if isinstance(spec, tuple) else spec

    profiles = [_retailer(i, rng, params, as_of, retailers) for i in range(retailers)]
    products, quotes = [], []
    for cat in category_names(categories):
        for j in range(draw(products_per_category)):
            pid = f"p-{cat.lower().replace(' ', '')}-{j:04d}"
            product = Product(pid, f"{cat} model {j} <deluxe> & co", cat)
            products.append(product)
            base = rng.randint(1000, 90000)
            k = min(draw(quotes_per_product), retailers)
            for r in rng.sample(profiles, k):
                if r.refurb_discounter or rng.random() < params.p_not_new:
                    cond = rng.choice((Condition.REFURBISHED, Condition.USED))
                else:
                    cond = Condition.NEW
                price = max(1, int(base * rng.uniform(0.8, 1.35)))
                quotes.append(PriceQuote(r.retailer_id, pid, cat, price, cond, captured_at))

    market = RetailMarket(as_of, captured_at, products, profiles, quotes)
    by_product: dict[str, list[PriceQuote]] = {p.product_id: [] for p in products}
    for q in quotes:
        by_product[q.product_id].append(q)
    for p in products:
        market.product_pages[p.product_id] = render_page(product_page_state(p, by_product[p.product_id]), PRODUCT_QUOTES_TEMPLATE)
    for r in profiles:
        market.retailer_pages[r.retailer_id] = render_page(retailer_page_state(r), RETAILER_TEMPLATE)
    return market


def product_page_state(product: Product, quotes: list[PriceQuote]) -> dict:
    return {
        "listing_kind": "product",
        "listing_id": product.product_id,
        "title": product.title,
        "category": product.category,
        "quotes": [
            {"retailer_id": q.retailer_id, "price": format_money(q.posted_price), "condition": q.condition.value}
            for q in quotes
        ],
    }


def retailer_page_state(r: RetailerProfile) -> dict:
    ratings = []
    if r.ratings is not None:
        ratings.append(
            {
                "on_time_delivery": r.ratings.on_time_delivery,
                "customer_support": r.ratings.customer_support,
                "product_met_expectations": r.ratings.product_met_expectations,
                "shop_again": r.ratings.shop_again,
                "survey_count": r.survey_count,
                "window_start": r.ratings_window[0].isoformat(),
                "window_end": r.ratings_window[1].isoformat(),
            }
        )
    return {
        "listing_kind": "retailer",
        "listing_id": r.retailer_id,
        "size_rank": r.size_rank,
        "catalog": "yes" if r.catalog else "no",
        "refurb_discounter": "yes" if r.refurb_discounter else "no",
        "stores": [{"state": s} for s in sorted(r.store_states)],
        "ratings": ratings,
    }
