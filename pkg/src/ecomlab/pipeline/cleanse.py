"""Cleansing rules for auction snapshot series."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..market import iso
from ..records import AuctionSnapshot


class CleanseStatus(str, enum.Enum):
    VALID = "Valid"
    SAMPLING_LOSS = "SamplingLoss"
    NO_INTEREST = "NoInterest"


@dataclass(frozen=True)
class CleanseVerdict:
    auction_id: str
    status: CleanseStatus
    detail: str = ""

    def to_dict(self) -> dict:
        return {"auction_id": self.auction_id, "status": self.status.value, "detail": self.detail}


def _auction_id(series: Sequence[AuctionSnapshot]) -> str:
    if not series:
        raise ValueError("cannot judge an empty snapshot series")
    return series[0].auction_id


def detect_sampling_loss(series: Sequence[AuctionSnapshot]) -> CleanseVerdict:
    """SamplingLoss iff two consecutive nonempty winner sets share no bidder.

    An empty set followed by a nonempty one is the auction starting, not a
    missed capture.
    """
    aid = _auction_id(series)
    for prev, cur in zip(series, series[1:]):
        a, b = prev.winner_ids(), cur.winner_ids()
        if a and b and not a & b:
            return CleanseVerdict(
                aid,
                CleanseStatus.SAMPLING_LOSS,
                f"disjoint winners between captures at {iso(prev.capture_time)} and {iso(cur.capture_time)}",
            )
    return CleanseVerdict(aid, CleanseStatus.VALID)


def detect_no_interest(series: Sequence[AuctionSnapshot]) -> CleanseVerdict:
    aid = _auction_id(series)
    if all(not s.winners for s in series):
        return CleanseVerdict(aid, CleanseStatus.NO_INTEREST, f"no winners in {len(series)} captures")
    return CleanseVerdict(aid, CleanseStatus.VALID)


def order_series(snapshots: Iterable[AuctionSnapshot]) -> list[AuctionSnapshot]:
    """Sort by capture time and drop exact repeats of the same capture."""
    out: list[AuctionSnapshot] = []
    for snap in sorted(snapshots, key=lambda s: s.capture_time):
        if out and out[-1] == snap:
            continue
        out.append(snap)
    return out


def judge_series(series: Sequence[AuctionSnapshot]) -> CleanseVerdict:
    """No-interest is checked first: an empty auction cannot show sampling loss."""
    verdict = detect_no_interest(series)
    if verdict.status is CleanseStatus.NO_INTEREST:
        return verdict
    return detect_sampling_loss(series)


def cleanse_auctions(
    snapshots: Iterable[AuctionSnapshot],
) -> tuple[dict[str, list[AuctionSnapshot]], list[CleanseVerdict]]:
    """Group by auction, order each series and keep only the Valid ones.

    Returns (valid series by auction id, one verdict per auction). Running it
    again on its own output returns the same valid series.
    """
    grouped: dict[str, list[AuctionSnapshot]] = {}
    for snap in snapshots:
        grouped.setdefault(snap.auction_id, []).append(snap)
    valid: dict[str, list[AuctionSnapshot]] = {}
    verdicts = []
    for aid in sorted(grouped):
        series = order_series(grouped[aid])
        verdict = judge_series(series)
        verdicts.append(verdict)
        if verdict.status is CleanseStatus.VALID:
            valid[aid] = series
    return valid, verdicts
