"""Bidder archetypes and seeded population generation."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass

from ..market import ConfigError, Money


class ArchetypeKind(str, enum.Enum):
    EARLY_MULTIPLE = "EarlyMultiple"
    EARLY_SINGLE = "EarlySingle"
    LATE_ARRIVER = "LateArriver"


LATE_ENTRY_FLOOR = 0.8


@dataclass(frozen=True)
class BidderArchetype:
    """Behavioural parameters for one class of simulated bidder.

    ``valuation_range`` is expressed as multiples of the auction's reference
    price so one archetype works across auctions of any price level.
    ``opening_fraction`` is the share of valuation offered on entry; zero
    means "bid the minimum required".
    """

    kind: ArchetypeKind
    entry_window: tuple[float, float]
    rebid_propensity: float
    valuation_range: tuple[float, float]
    opening_fraction: float = 0.0
    multi_unit_prob: float = 0.0
    late_floor: float = LATE_ENTRY_FLOOR

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ArchetypeKind(self.kind))
        lo, hi = self.entry_window
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError(f"entry_window {self.entry_window} not inside [0, 1]")
        if self.kind is ArchetypeKind.LATE_ARRIVER and lo < self.late_floor:
            raise ConfigError(f"LateArriver entry window must start at >= {self.late_floor}")
        if self.kind is ArchetypeKind.EARLY_SINGLE and self.rebid_propensity != 0:
            raise ConfigError("EarlySingle bidders never rebid")
        if not 0.0 <= self.rebid_propensity <= 1.0:
            raise ConfigError("rebid_propensity must be a probability")
        if not 0 < self.valuation_range[0] <= self.valuation_range[1]:
            raise ConfigError("valuation_range must be positive and ordered")


DEFAULT_ARCHETYPES: dict[ArchetypeKind, BidderArchetype] = {
    ArchetypeKind.EARLY_MULTIPLE: BidderArchetype(
        ArchetypeKind.EARLY_MULTIPLE, (0.0, 0.3), 1.0, (1.1, 1.3), 0.0, 0.1
    ),
    ArchetypeKind.EARLY_SINGLE: BidderArchetype(
        ArchetypeKind.EARLY_SINGLE, (0.0, 0.3), 0.0, (1.05, 1.2), 1.0, 0.1
    ),
    ArchetypeKind.LATE_ARRIVER: BidderArchetype(
        ArchetypeKind.LATE_ARRIVER, (0.85, 1.0), 0.3, (1.3, 1.5), 1.0, 0.1
    ),
}


@dataclass(frozen=True)
class SimBidder:
    bidder_id: str
    archetype: BidderArchetype
    valuation_factor: float
    entry_fraction: float
    quantity: int = 1

    @property
    def kind(self) -> ArchetypeKind:
        return self.archetype.kind

    def valuation(self, reference_price: Money) -> Money:
        return int(round(reference_price * self.valuation_factor))


def proportional_counts(fractions: list[float], n: int) -> list[int]:
    """Largest-remainder rounding of ``n * fraction``; ties go to the earlier entry."""
    raw = [f * n for f in fractions]
    counts = [math.floor(r + 1e-9) for r in raw]
    short = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def spawn_population(
    mix: dict[ArchetypeKind | str, float],
    n: int,
    seed: int,
    archetypes: dict[ArchetypeKind, BidderArchetype] | None = None,
    id_prefix: str = "b",
    max_quantity: int = 3,
) -> list[SimBidder]:
    """Draw ``n`` bidders whose archetype counts follow ``mix`` exactly (after rounding)."""
    if n < 0:
        raise ConfigError("population size must be non-negative")
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"archetype mix must sum to 1, got {total:.6g}")
    archetypes = archetypes or DEFAULT_ARCHETYPES
    kinds = [ArchetypeKind(k) for k in mix]
    counts = proportional_counts([mix[k] for k in mix], n)

    rng = random.Random(seed)
    bidders = []
    for kind, count in zip(kinds, counts):
        arch = archetypes[kind]
        for _ in range(count):
            quantity = 1
            if max_quantity > 1 and rng.random() < arch.multi_unit_prob:
                quantity = rng.randint(2, max_quantity)
            bidders.append(
                SimBidder(
                    bidder_id="",
                    archetype=arch,
                    valuation_factor=rng.uniform(*arch.valuation_range),
                    entry_fraction=rng.uniform(*arch.entry_window),
                    quantity=quantity,
                )
            )
    rng.shuffle(bidders)
    width = max(3, len(str(n)))
    return [
        SimBidder(f"{id_prefix}{i:0{width}d}", b.archetype, b.valuation_factor, b.entry_fraction, b.quantity)
        for i, b in enumerate(bidders)
    ]
