"""CSV reports with fixed column layouts, plus optional plots."""

from __future__ import annotations

import csv
import enum
import io
from pathlib import Path
from typing import Sequence

from ..pipeline.quotes import TALLY_COLUMNS, CategoryTally
from .market_stats import DispersionReport
from .taxonomy import TaxonomyResult


class ReportKind(str, enum.Enum):
    TABLE4_TALLY = "Table4Tally"
    TAXONOMY_SUMMARY = "TaxonomySummary"
    DISPERSION_TABLE = "DispersionTable"
    CONCORDANCE_TABLE = "ConcordanceTable"


class ReportError(TypeError):
    pass


COLUMNS: dict[ReportKind, tuple[str, ...]] = {
    ReportKind.TABLE4_TALLY: TALLY_COLUMNS,
    ReportKind.TAXONOMY_SUMMARY: ("cluster", "label", "size", "share", "entry_norm", "exit_norm", "bid_count"),
    ReportKind.DISPERSION_TABLE: ("product_id", "n_quotes", "min", "max", "range", "range_pct", "cv"),
    ReportKind.CONCORDANCE_TABLE: ("album", "lag", "statistic", "comparisons"),
}

FILENAMES = {
    ReportKind.TABLE4_TALLY: "quote_tallies.csv",
    ReportKind.TAXONOMY_SUMMARY: "taxonomy.csv",
    ReportKind.DISPERSION_TABLE: "dispersion.csv",
    ReportKind.CONCORDANCE_TABLE: "concordance.csv",
}


def _rows(dataset, kind: ReportKind) -> list[dict]:
    def expect(ok: bool) -> None:
        if not ok:
            raise ReportError(f"dataset of type {type(dataset).__name__} does not fit report {kind.value}")

    if kind is ReportKind.TAXONOMY_SUMMARY and isinstance(dataset, TaxonomyResult):
        return dataset.rows()
    if dataset is None:
        return []
    expect(isinstance(dataset, Sequence) and not isinstance(dataset, (str, bytes)))
    if dataset and all(isinstance(r, dict) for r in dataset):
        # rows already in report layout, e.g. read back from the record store
        expect(all(set(r) == set(COLUMNS[kind]) for r in dataset))
        return list(dataset)
    if kind is ReportKind.TABLE4_TALLY:
        expect(all(isinstance(r, CategoryTally) for r in dataset))
        return [r.table_row() for r in dataset]
    if kind is ReportKind.DISPERSION_TABLE:
        expect(all(isinstance(r, DispersionReport) for r in dataset))
        return [r.row() for r in dataset]
    expect(not dataset)
    return []


def render_csv(dataset, kind: ReportKind | str) -> str:
    kind = ReportKind(kind)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS[kind], lineterminator="\n")
    writer.writeheader()
    writer.writerows(_rows(dataset, kind))
    return buf.getvalue()


def emit_report(dataset, kind: ReportKind | str, out_dir: Path | str, plots: bool = False) -> list[Path]:
    """Write the CSV for ``kind`` (and its plot when asked); returns the paths written."""
    kind = ReportKind(kind)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = render_csv(dataset, kind)
    path = out / FILENAMES[kind]
    path.write_text(text, encoding="utf-8")
    written = [path]
    if plots and dataset:
        if kind is ReportKind.TAXONOMY_SUMMARY and isinstance(dataset, TaxonomyResult):
            written.append(
                plot_taxonomy(
                    [(f.entry_norm, f.exit_norm) for f in dataset.features],
                    [lab.value for lab in dataset.point_labels],
                    out / "taxonomy.png",
                )
            )
        elif kind is ReportKind.DISPERSION_TABLE:
            written.append(plot_dispersion([r["range_pct"] for r in _rows(dataset, kind)], out / "dispersion.png"))
    return written


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_taxonomy(points: Sequence[tuple[float, float]], labels: Sequence[str], path: Path) -> Path:
    """Bidders in the entry/exit plane, coloured by taxonomy label."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 5))
    for label in sorted(set(labels)):
        xs = [p[0] for p, lab in zip(points, labels) if lab == label]
        ys = [p[1] for p, lab in zip(points, labels) if lab == label]
        ax.scatter(xs, ys, s=10, alpha=0.6, label=label)
    ax.set_xlabel("entry (fraction of auction)")
    ax.set_ylabel("exit (fraction of auction)")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_dispersion(range_pcts: Sequence[float], path: Path) -> Path:
    """Histogram of relative price ranges across products."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(range_pcts), bins=20)
    ax.set_xlabel("price range / lowest price")
    ax.set_ylabel("products")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
