"""Bidder features and the three-group strategy taxonomy."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..market import Timestamp
from ..pipeline.reconstruct import BidderProfile
from .kmeans import Clustering, best_of, choose_k


class TaxonomyLabel(str, enum.Enum):
    EARLY_MULTIPLE = "EarlyMultiple"
    EARLY_SINGLE = "EarlySingle"
    LATE_ARRIVER = "LateArriver"
    OTHER = "Other"


@dataclass(frozen=True)
class FeatureVector:
    bidder_id: str
    entry_norm: float
    exit_norm: float
    bid_count: int
    auction_id: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.entry_norm <= self.exit_norm <= 1.0:
            raise ValueError(f"need 0 <= entry <= exit <= 1, got {self.entry_norm}, {self.exit_norm}")

    def point(self) -> tuple[float, float, float]:
        """Clustering coordinates; counts go through log2(1 + n) to sit on the time axes' scale."""
        return (self.entry_norm, self.exit_norm, float(np.log2(1 + self.bid_count)))


def bidder_features(profile: BidderProfile, opened: Timestamp, ended: Timestamp) -> FeatureVector:
    """Entry and exit as fractions of the auction's actual life."""
    span = ended - opened
    if span <= 0:
        raise ValueError(f"auction {profile.auction_id} has zero or negative duration")
    if not opened <= profile.entry_time <= profile.exit_time <= ended:
        raise ValueError(f"profile {profile.bidder_id} times fall outside [{opened}, {ended}]")
    return FeatureVector(
        profile.bidder_id,
        (profile.entry_time - opened) / span,
        (profile.exit_time - opened) / span,
        profile.bid_count,
        profile.auction_id,
    )


def feature_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([f.point() for f in features], dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class LabelThresholds:
    early_entry: float = 0.5
    multiple_bids: float = 1.5
    late_entry: float = 0.8


def label_centroid(centroid: Sequence[float], thresholds: LabelThresholds = LabelThresholds()) -> TaxonomyLabel:
    """Label one centroid given in (entry, exit, raw bid count) units."""
    entry, _, count = centroid
    if entry <= thresholds.early_entry:
        return TaxonomyLabel.EARLY_MULTIPLE if count > thresholds.multiple_bids else TaxonomyLabel.EARLY_SINGLE
    if entry > thresholds.late_entry:
        return TaxonomyLabel.LATE_ARRIVER
    return TaxonomyLabel.OTHER


def label_clusters(
    clustering: Clustering,
    thresholds: LabelThresholds = LabelThresholds(),
    log_counts: bool = True,
) -> dict[int, TaxonomyLabel]:
    """Label each cluster from its centroid.

    With ``log_counts`` the third coordinate is taken to be log2(1 + count)
    and is mapped back to a bid count before the thresholds apply.
    """
    out = {}
    for j, c in enumerate(clustering.centroids):
        count = 2.0 ** c[2] - 1.0 if log_counts else c[2]
        out[j] = label_centroid((c[0], c[1], count), thresholds)
    return out


@dataclass
class TaxonomyResult:
    features: list[FeatureVector]
    clustering: Clustering
    silhouette: float
    silhouette_by_k: dict[int, float]
    cluster_labels: dict[int, TaxonomyLabel]
    point_labels: list[TaxonomyLabel] = field(default_factory=list)

    def proportions(self) -> dict[TaxonomyLabel, float]:
        n = len(self.point_labels)
        return {lab: (sum(1 for p in self.point_labels if p is lab) / n if n else 0.0) for lab in TaxonomyLabel}

    def rows(self) -> list[dict]:
        sizes = self.clustering.sizes()
        rows = []
        for j, c in enumerate(self.clustering.centroids):
            rows.append(
                {
                    "cluster": j,
                    "label": self.cluster_labels[j].value,
                    "size": int(sizes[j]),
                    "share": round(float(sizes[j]) / max(1, len(self.point_labels)), 6),
                    "entry_norm": round(float(c[0]), 6),
                    "exit_norm": round(float(c[1]), 6),
                    "bid_count": round(float(2.0 ** c[2] - 1.0), 6),
                }
            )
        return rows


def bidder_taxonomy(
    features: Sequence[FeatureVector],
    k_range: Sequence[int] = range(2, 7),
    seed: int = 0,
    k: int | None = None,
    thresholds: LabelThresholds = LabelThresholds(),
) -> TaxonomyResult:
    """Cluster bidders (choosing k by silhouette unless given) and label the clusters."""
    X = feature_matrix(features)
    if k is None:
        n_distinct = len(np.unique(X, axis=0))
        ks = [kk for kk in k_range if 2 <= kk <= min(len(X) - 1, n_distinct)]
        k, score, scores = choose_k(X, ks, seed=seed)
    else:
        score, scores = float("nan"), {}
    clustering = best_of(X, k, seed=seed)
    labels = label_clusters(clustering, thresholds)
    return TaxonomyResult(
        list(features), clustering, score, scores, labels, [labels[int(a)] for a in clustering.assignment]
    )


def relabel(clustering: Clustering, permutation: Mapping[int, int]) -> Clustering:
    """Same partition under different cluster ids (used to check label invariance)."""
    order = sorted(permutation, key=lambda j: permutation[j])
    centroids = clustering.centroids[order]
    assignment = np.array([permutation[int(a)] for a in clustering.assignment])
    return Clustering(clustering.k, centroids, assignment, clustering.sse, clustering.iterations, clustering.seed)
