"""Seeded synthetic markets that stand in for live auction, P2P and retail sites."""

from .auction import GroundTruthLog, LoggedBid, run_auction
from .build import MarketSettings, build_market, simulate_auctions
from .p2p import Album, P2PCorpus, gen_p2p_corpus
from .population import ArchetypeKind, BidderArchetype, SimBidder, spawn_population
from .retail import RetailMarket, RetailParams, gen_retail_market
from .service import Response, RunningService, SimulatedMarket, auction_page_state, serve
from .templates import PageTemplate, RenderError, TemplateError, render_page

__all__ = [
    "Album",
    "ArchetypeKind",
    "BidderArchetype",
    "GroundTruthLog",
    "LoggedBid",
    "MarketSettings",
    "P2PCorpus",
    "PageTemplate",
    "RenderError",
    "Response",
    "RetailMarket",
    "RetailParams",
    "RunningService",
    "SimBidder",
    "SimulatedMarket",
    "TemplateError",
    "auction_page_state",
    "build_market",
    "gen_p2p_corpus",
    "gen_retail_market",
    "render_page",
    "run_auction",
    "serve",
    "simulate_auctions",
    "spawn_population",
]
