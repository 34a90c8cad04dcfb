"""Structured records produced by extraction and consumed downstream."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Any

from .market import Condition, Money, ProductInfo, Timestamp


class ChannelClass(str, enum.Enum):
    PURE_PLAY = "PurePlay"
    LOCAL_BRICK_N_CLICK = "LocalBrickNClick"
    NATIONAL_BRICK_N_CLICK = "NationalBrickNClick"


@dataclass(frozen=True)
class WinnerRow:
    bidder_id: str
    price: Money
    quantity: int


@dataclass(frozen=True)
class AuctionSnapshot:
    auction_id: str
    capture_time: Timestamp
    product: ProductInfo
    min_required_bid: Money
    lot_size: int
    winners: tuple[WinnerRow, ...] = ()
    bid_increment: Money | None = None
    closed: bool = False
    scheduled_open: Timestamp | None = None
    scheduled_close: Timestamp | None = None
    # closing time implied by the bids shown so far (soft close included)
    ends: Timestamp | None = None

    def winner_ids(self) -> set[str]:
        return {w.bidder_id for w in self.winners}

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["product"]["condition"] = self.product.condition.value
        d["winners"] = [[w.bidder_id, w.price, w.quantity] for w in self.winners]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AuctionSnapshot:
        return cls(
            auction_id=d["auction_id"],
            capture_time=d["capture_time"],
            product=ProductInfo(**d["product"]),
            min_required_bid=d["min_required_bid"],
            lot_size=d["lot_size"],
            winners=tuple(WinnerRow(*w) for w in d["winners"]),
            bid_increment=d.get("bid_increment"),
            closed=d.get("closed", False),
            scheduled_open=d.get("scheduled_open"),
            scheduled_close=d.get("scheduled_close"),
            ends=d.get("ends"),
        )


@dataclass(frozen=True)
class SearchObservation:
    capture_time: Timestamp
    query_album: str
    sharer_id: str
    file_title: str
    album_match: bool
    file_size: int
    bitrate: int
    track_length: int
    connection_class: str
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.file_size < 0 or self.bitrate < 0:
            raise ValueError("file_size and bitrate must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PriceQuote:
    retailer_id: str
    product_id: str
    category: str
    posted_price: Money
    condition: Condition
    capture_time: Timestamp

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition", Condition(self.condition))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["condition"] = self.condition.value
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PriceQuote:
        return cls(**d)


@dataclass(frozen=True)
class Ratings:
    on_time_delivery: float
    customer_support: float
    product_met_expectations: float
    shop_again: float

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not 1 <= value <= 10:
                raise ValueError(f"rating {name}={value} outside the 1-10 scale")


@dataclass(frozen=True)
class RetailerProfile:
    retailer_id: str
    ratings: Ratings | None = None
    survey_count: int = 0
    ratings_window: tuple[date, date] | None = None
    size_rank: int | None = None
    store_states: frozenset[str] = frozenset()
    channel: ChannelClass | None = None
    catalog: bool = False
    refurb_discounter: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "retailer_id": self.retailer_id,
            "ratings": asdict(self.ratings) if self.ratings else None,
            "survey_count": self.survey_count,
            "ratings_window": [d.isoformat() for d in self.ratings_window] if self.ratings_window else None,
            "size_rank": self.size_rank,
            "store_states": sorted(self.store_states),
            "channel": self.channel.value if self.channel else None,
            "catalog": self.catalog,
            "refurb_discounter": self.refurb_discounter,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RetailerProfile:
        window = d.get("ratings_window")
        return cls(
            retailer_id=d["retailer_id"],
            ratings=Ratings(**d["ratings"]) if d.get("ratings") else None,
            survey_count=d.get("survey_count", 0),
            ratings_window=(date.fromisoformat(window[0]), date.fromisoformat(window[1])) if window else None,
            size_rank=d.get("size_rank"),
            store_states=frozenset(d.get("store_states", ())),
            channel=ChannelClass(d["channel"]) if d.get("channel") else None,
            catalog=d.get("catalog", False),
            refurb_discounter=d.get("refurb_discounter", False),
        )
