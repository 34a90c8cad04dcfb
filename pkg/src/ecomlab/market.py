"""Core domain types and Yankee auction mechanics.

Money is held as integer cents and timestamps as integer seconds since the
Unix epoch (UTC). Everything in this module is a pure function over frozen
values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .constants import SOFT_CLOSE_WINDOW_SECONDS

Money = int
Timestamp = int


class Condition(str, enum.Enum):
    NEW = "New"
    REFURBISHED = "Refurbished"
    USED = "Used"


class SourceKind(str, enum.Enum):
    """The five data types a dataset can originate from."""

    FIELD = "Field"
    EXPERIMENTAL = "Experimental"
    SURVEY = "Survey"
    SIMULATION = "Simulation"
    INTERNET = "Internet"


class ConfigError(ValueError):
    """Raised when a configuration value violates its contract."""


def iso(ts: Timestamp) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_iso(text: str) -> Timestamp:
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_money(cents: Money) -> str:
    """Render cents US-style, e.g. ``48900 -> "$489.00"``."""
    sign = "-" if cents < 0 else ""
    dollars, rest = divmod(abs(cents), 100)
    return f"{sign}${dollars:,}.{rest:02d}"


@dataclass(frozen=True)
class ProductInfo:
    title: str
    category: str
    condition: Condition = Condition.NEW
    life_cycle: str = "current"

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition", Condition(self.condition))


@dataclass(frozen=True)
class DatasetProvenance:
    source_kind: SourceKind
    collected_at: Timestamp
    collector: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))


@dataclass(frozen=True)
class AuctionConfig:
    auction_id: str
    lot_size: int
    starting_bid: Money
    bid_increment: Money
    scheduled_open: Timestamp
    scheduled_close: Timestamp
    product: ProductInfo
    soft_close_window: int = SOFT_CLOSE_WINDOW_SECONDS

    def __post_init__(self) -> None:
        if self.lot_size < 1:
            raise ConfigError(f"lot_size must be >= 1, got {self.lot_size}")
        if self.bid_increment <= 0:
            raise ConfigError("bid_increment must be positive")
        if self.starting_bid <= 0:
            raise ConfigError("starting_bid must be positive")
        if self.scheduled_close <= self.scheduled_open:
            raise ConfigError("scheduled_close must be after scheduled_open")
        if self.soft_close_window <= 0:
            raise ConfigError("soft_close_window must be positive")

    @property
    def duration(self) -> int:
        return self.scheduled_close - self.scheduled_open


@dataclass(frozen=True)
class BidPoint:
    """One bid: ``quantity`` units, all at the same per-unit ``price``."""

    bidder_id: str
    price: Money
    quantity: int
    placed_at: Timestamp

    def __post_init__(self) -> None:
        if self.price <= 0:
            raise ValueError(f"bid price must be positive, got {self.price}")
        if self.quantity < 1:
            raise ValueError(f"bid quantity must be >= 1, got {self.quantity}")


@dataclass(frozen=True)
class Award:
    bidder_id: str
    units: int
    price: Money


@dataclass(frozen=True)
class Allocation:
    winners: tuple[Award, ...] = ()

    @property
    def units_allocated(self) -> int:
        return sum(w.units for w in self.winners)

    @property
    def lowest_price(self) -> Money | None:
        return min((w.price for w in self.winners), default=None)

    def winner_ids(self) -> list[str]:
        return [w.bidder_id for w in self.winners]


def rank_key(bid: BidPoint) -> tuple:
    """Sort key: higher price, then earlier placement, then larger quantity.

    Bidder id is the final tiebreak so ranking is total and deterministic.
    """
    return (-bid.price, bid.placed_at, -bid.quantity, bid.bidder_id)


def allocate_winners(bids: Iterable[BidPoint], lot_size: int) -> Allocation:
    """Fill the lot greedily down the ranked bid list.

    Only the last bid that receives units can be partially filled.
    """
    remaining = lot_size
    winners = []
    for bid in sorted(bids, key=rank_key):
        if remaining == 0:
            break
        units = min(bid.quantity, remaining)
        winners.append(Award(bid.bidder_id, units, bid.price))
        remaining -= units
    return Allocation(tuple(winners))


def min_required_bid(config: AuctionConfig, standing: Allocation) -> Money:
    if standing.units_allocated < config.lot_size:
        return config.starting_bid
    return standing.lowest_price + config.bid_increment


def auction_end_time(config: AuctionConfig, accepted_bid_times: Sequence[Timestamp]) -> Timestamp:
    """Earliest t >= scheduled close with no accepted bid in (t - window, t]."""
    window = config.soft_close_window
    end = config.scheduled_close
    for t in sorted(accepted_bid_times):
        if t > end:
            # the auction already closed quietly before this bid
            break
        if t > end - window:
            end = t + window
    return end


def payment_schedule(allocation: Allocation) -> list[tuple[str, Money]]:
    """Each winner pays their own last bid for every unit awarded."""
    return [(w.bidder_id, w.units * w.price) for w in allocation.winners]


@dataclass
class StandingBook:
    """Mutable book of each bidder's latest accepted bid.

    Used by the simulator and by replay checks. Rejects bids below the
    minimum required bid and any attempt to lower a bidder's quantity.
    """

    config: AuctionConfig
    bids: dict[str, BidPoint] = field(default_factory=dict)

    def allocation(self) -> Allocation:
        return allocate_winners(self.bids.values(), self.config.lot_size)

    def min_required(self) -> Money:
        return min_required_bid(self.config, self.allocation())

    def accepts(self, bid: BidPoint) -> bool:
        if bid.price < self.min_required():
            return False
        previous = self.bids.get(bid.bidder_id)
        if previous is not None and bid.quantity < previous.quantity:
            return False
        return True

    def submit(self, bid: BidPoint) -> bool:
        if not self.accepts(bid):
            return False
        self.bids[bid.bidder_id] = bid
        return True
