"""Assemble a whole seeded market from a handful of settings."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..market import AuctionConfig, Condition, ProductInfo
from .auction import GroundTruthLog, run_auction
from .p2p import default_albums, gen_p2p_corpus
from .population import ArchetypeKind, spawn_population
from .retail import RetailParams, gen_retail_market
from .service import SimulatedMarket

EPOCH = 946684800  # 2000-01-01T00:00:00Z
DAY = 86400

DEFAULT_MIX = {
    ArchetypeKind.EARLY_MULTIPLE: 0.4,
    ArchetypeKind.EARLY_SINGLE: 0.3,
    ArchetypeKind.LATE_ARRIVER: 0.3,
}


@dataclass
class MarketSettings:
    auctions: int = 20
    lot_range: tuple[int, int] = (1, 10)
    # when set, lot size is drawn as this fraction of the bidder count instead
    lot_fraction: tuple[float, float] | None = None
    bidder_range: tuple[int, int] = (5, 50)
    mix: dict = field(default_factory=lambda: dict(DEFAULT_MIX))
    duration_days: tuple[int, int] = (1, 3)
    albums: int = 0
    rows_per_album: tuple[int, int] = (0, 40)
    retail_categories: int = 0
    retailers: int = 40
    products_per_category: tuple[int, int] = (22, 30)
    quotes_per_product: tuple[int, int] = (9, 16)
    retail: RetailParams = field(default_factory=RetailParams)


def make_auction_config(
    index: int, rng: random.Random, settings: MarketSettings, bidders: int = 0
) -> AuctionConfig:
    open_at = EPOCH + index * DAY + rng.randrange(0, DAY // 2)
    duration = rng.randint(*settings.duration_days) * DAY
    start = rng.randrange(2000, 40000, 100)
    if settings.lot_fraction is not None:
        lot = max(1, round(bidders * rng.uniform(*settings.lot_fraction)))
    else:
        lot = rng.randint(*settings.lot_range)
    return AuctionConfig(
        auction_id=f"A{index:04d}",
        lot_size=lot,
        starting_bid=start,
        bid_increment=max(100, (start // 50) // 100 * 100),
        scheduled_open=open_at,
        scheduled_close=open_at + duration,
        product=ProductInfo(
            title=rng.choice(["Laser printer", "Inkjet printer", "17in monitor", "Scanner", "Camcorder"])
            + f" lot {index}",
            category=rng.choice(["Computer hardware", "Consumer electronics"]),
            condition=rng.choice([Condition.NEW, Condition.REFURBISHED]),
            life_cycle=rng.choice(["current", "end-of-life"]),
        ),
    )


def simulate_auctions(settings: MarketSettings, seed: int) -> dict[str, GroundTruthLog]:
    rng = random.Random(seed)
    logs = {}
    for i in range(settings.auctions):
        n = rng.randint(*settings.bidder_range)
        cfg = make_auction_config(i, rng, settings, n)
        population = spawn_population(settings.mix, n, seed=rng.getrandbits(32), id_prefix=f"{cfg.auction_id}-b")
        logs[cfg.auction_id] = run_auction(cfg, population, seed=rng.getrandbits(32))
    return logs


def build_market(settings: MarketSettings, seed: int) -> SimulatedMarket:
    market = SimulatedMarket(auctions=simulate_auctions(settings, seed))
    rng = random.Random(seed + 1)
    if settings.albums:
        albums = default_albums(settings.albums)
        counts = {a.album_id: rng.randint(*settings.rows_per_album) for a in albums}
        market.p2p = gen_p2p_corpus(albums, counts, seed=rng.getrandbits(32), captured_at=EPOCH)
    if settings.retail_categories:
        market.retail = gen_retail_market(
            settings.retail_categories,
            settings.retailers,
            settings.products_per_category,
            seed=rng.getrandbits(32),
            quotes_per_product=settings.quotes_per_product,
            params=settings.retail,
        )
    return market
