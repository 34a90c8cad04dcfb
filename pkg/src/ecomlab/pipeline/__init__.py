"""Cleanse, reconstruct, filter, collate and flag extracted records."""

from .cleanse import (
    CleanseStatus,
    CleanseVerdict,
    cleanse_auctions,
    detect_no_interest,
    detect_sampling_loss,
    judge_series,
    order_series,
)
from .collate import BidRecord, CollatedRow, Level, bid_records, collate
from .quotes import (
    TALLY_COLUMNS,
    AnalyzableQuoteSet,
    CategoryTally,
    Thresholds,
    classify_channel,
    filter_quotes,
    validate_rating,
    with_channel,
)
from .reconstruct import (
    BidderProfile,
    BidEvent,
    filter_frivolous,
    final_allocation,
    infer_events,
    is_frivolous,
    profiles_from_events,
    reconstruct_bids,
)
from .review import ReasonCode, ReviewError, ReviewItem, ReviewQueue, find_anomalies, flag_anomalies

__all__ = [name for name in dir() if not name.startswith("_")]
