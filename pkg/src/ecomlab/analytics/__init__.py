"""Bidder taxonomy, price dispersion, P2P corpus statistics and reports."""

from .kmeans import Clustering, ClusteringError, best_of, choose_k, kmeans, silhouette_samples, silhouette_score
from .market_stats import (
    Concordance,
    CorpusSummary,
    DispersionReport,
    InsufficientOverlap,
    NotEnoughQuotes,
    concordance_counts,
    concordance_table,
    corpus_summary,
    dispersion_from_prices,
    dispersion_metrics,
    dispersion_table,
    sharing_chart_concordance,
    summarize_counts,
)
from .reports import COLUMNS, ReportError, ReportKind, emit_report, render_csv
from .taxonomy import (
    FeatureVector,
    LabelThresholds,
    TaxonomyLabel,
    TaxonomyResult,
    bidder_features,
    bidder_taxonomy,
    feature_matrix,
    label_centroid,
    label_clusters,
    relabel,
)

__all__ = [name for name in dir() if not name.startswith("_")]
