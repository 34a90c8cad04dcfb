"""Price dispersion, P2P corpus summaries and sharing/chart concordance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..market import Money
from ..records import PriceQuote, SearchObservation


class NotEnoughQuotes(ValueError):
    pass


@dataclass(frozen=True)
class DispersionReport:
    product_id: str
    n_quotes: int
    min: Money
    max: Money
    range: Money
    range_pct: float
    cv: float

    def row(self) -> dict:
        return {
            "product_id": self.product_id,
            "n_quotes": self.n_quotes,
            "min": self.min,
            "max": self.max,
            "range": self.range,
            "range_pct": round(self.range_pct, 6),
            "cv": round(self.cv, 6),
        }


def dispersion_from_prices(product_id: str, prices: Sequence[Money]) -> DispersionReport:
    """Range, range relative to the minimum, and coefficient of variation.

    The CV uses the population standard deviation: the quotes are the whole
    set of offers seen for the product, not a sample of them.
    """
    if len(prices) < 2:
        raise NotEnoughQuotes(f"{product_id}: need at least 2 quotes, got {len(prices)}")
    p = np.asarray(prices, dtype=float)
    lo, hi = int(min(prices)), int(max(prices))
    mean = float(p.mean())
    return DispersionReport(
        product_id,
        len(prices),
        lo,
        hi,
        hi - lo,
        (hi - lo) / lo if lo > 0 else float("inf"),
        float(p.std(ddof=0)) / mean if mean > 0 else 0.0,
    )


def dispersion_metrics(quotes: Sequence[PriceQuote]) -> DispersionReport:
    """Dispersion across all quotes for one product."""
    if not quotes:
        raise NotEnoughQuotes("no quotes")
    ids = {q.product_id for q in quotes}
    if len(ids) != 1:
        raise ValueError(f"quotes span several products: {sorted(ids)}")
    return dispersion_from_prices(quotes[0].product_id, [q.posted_price for q in quotes])


def dispersion_table(quotes: Sequence[PriceQuote]) -> list[DispersionReport]:
    """One report per product with at least two quotes, sorted by product id."""
    by_product: dict[str, list[PriceQuote]] = {}
    for q in quotes:
        by_product.setdefault(q.product_id, []).append(q)
    return [dispersion_metrics(qs) for pid, qs in sorted(by_product.items()) if len(qs) >= 2]


# ------------------------------------------------------------------ P2P


@dataclass(frozen=True)
class CorpusSummary:
    users: float
    files: float
    files_per_user: float
    runs: int = 1


def summarize_counts(users: float, files: float, runs: int = 1) -> CorpusSummary:
    if users <= 0:
        raise ValueError("files per user is undefined without users")
    return CorpusSummary(users, files, files / users, runs)


def corpus_summary(runs: Sequence[Sequence[SearchObservation]]) -> CorpusSummary:
    """Average distinct sharers and result rows per capture run.

    ``files_per_user`` is the ratio of the two averages, matching how a
    network-wide "average users sharing average files" figure reads.
    """
    runs = [list(r) for r in runs]
    if not runs:
        raise ValueError("no capture runs")
    users = [len({o.sharer_id for o in run}) for run in runs]
    files = [len(run) for run in runs]
    return summarize_counts(sum(users) / len(runs), sum(files) / len(runs), len(runs))


# ------------------------------------------------------------ concordance


class InsufficientOverlap(ValueError):
    pass


@dataclass(frozen=True)
class Concordance:
    statistic: float
    agreements: int
    disagreements: int
    comparisons: int


def _sign(x: float) -> int:
    return int(x > 0) - int(x < 0)


def concordance_counts(sharing: Sequence[float], chart: Sequence[float], lag: int = 1) -> Concordance:
    """Sign agreement between week-on-week sharing changes and chart moves ``lag`` weeks later.

    A chart improvement is a fall in position number. Weeks where either
    series is flat are left out of the comparison.
    """
    if lag < 0:
        raise ValueError("lag must be >= 0")
    n = min(len(sharing), len(chart))
    pairs = [(w, w + lag) for w in range(1, n) if w + lag < n]
    if len(pairs) < 2:
        raise InsufficientOverlap(f"only {len(pairs)} aligned weeks for lag {lag}")
    agree = disagree = 0
    for w, v in pairs:
        ds = _sign(sharing[w] - sharing[w - 1])
        improve = _sign(chart[v - 1] - chart[v])
        if ds == 0 or improve == 0:
            continue
        if ds == improve:
            agree += 1
        else:
            disagree += 1
    total = agree + disagree
    stat = (agree - disagree) / total if total else 0.0
    return Concordance(stat, agree, disagree, total)


def sharing_chart_concordance(sharing: Sequence[float], chart: Sequence[float], lag: int = 1) -> float:
    return concordance_counts(sharing, chart, lag).statistic


def concordance_table(
    sharing: Mapping[str, Sequence[float]],
    chart: Mapping[str, Sequence[float]],
    lag: int = 1,
) -> list[dict]:
    """Per-album statistics plus a pooled row; albums with too little overlap are skipped."""
    rows = []
    agree = disagree = 0
    for album in sorted(set(sharing) & set(chart)):
        try:
            c = concordance_counts(sharing[album], chart[album], lag)
        except InsufficientOverlap:
            continue
        agree += c.agreements
        disagree += c.disagreements
        rows.append({"album": album, "lag": lag, "statistic": round(c.statistic, 6), "comparisons": c.comparisons})
    if rows:
        total = agree + disagree
        rows.append(
            {
                "album": "ALL",
                "lag": lag,
                "statistic": round((agree - disagree) / total, 6) if total else 0.0,
                "comparisons": total,
            }
        )
    return rows
