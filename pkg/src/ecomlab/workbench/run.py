"""The six-stage run: harvest, extract, cleanse, collate, analyze, report.

Every stage reads its inputs from the store and writes its outputs back, so
any stage can be re-run on its own from archived inputs. A failing target
is recorded (gap, Malformed verdict or review item) and never stops the
other targets.
"""

from __future__ import annotations

import logging
import time
import uuid
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, time as dtime, timezone
from pathlib import Path
from typing import Callable

from ..analytics.kmeans import ClusteringError
from ..analytics.market_stats import corpus_summary, dispersion_table
from ..analytics.reports import ReportKind, emit_report, plot_taxonomy
from ..analytics.taxonomy import TaxonomyLabel, bidder_features, bidder_taxonomy
from ..extractor import Malformed, RecordKind, extract_auction, extract_quotes, extract_search, load_rules
from ..harvester import (
    CaptureResult,
    Client,
    GapRecord,
    HostRateLimiter,
    HttpClient,
    LocalClient,
    RetryPolicy,
    Target,
    Watchlist,
    capture_series,
    fetch,
    harvest_parallel,
    plan_schedule,
)
from ..market import ConfigError, DatasetProvenance, SourceKind, iso
from ..pipeline.cleanse import cleanse_auctions
from ..pipeline.collate import Level, bid_records, collate
from ..pipeline.quotes import Thresholds, filter_quotes, with_channel
from ..pipeline.reconstruct import (
    BidEvent,
    BidderProfile,
    filter_frivolous,
    final_allocation,
    infer_events,
    profiles_from_events,
)
from ..pipeline.review import ReasonCode, ReviewItem, _ref, find_anomalies
from ..records import AuctionSnapshot, PriceQuote, RetailerProfile, SearchObservation
from ..simulator.build import MarketSettings, build_market
from ..simulator.service import SimulatedMarket
from .config import Config
from .store import StoreLayout, read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

STAGES = ("harvest", "extract", "cleanse", "collate", "analyze", "report")
MAX_INTERVAL_CYCLES = 20_000


@dataclass
class StageOutcome:
    stage: str
    records_in: int
    records_out: int
    flags: int
    detail: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    run_id: str
    started_at: str
    finished_at: str
    config_digest: str
    seed: int
    stages: list[StageOutcome]
    provenance: DatasetProvenance
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["provenance"] = {
            "source_kind": self.provenance.source_kind.value,
            "collected_at": iso(self.provenance.collected_at),
            "collector": self.provenance.collector,
        }
        return d

    def comparable(self) -> dict:
        """The manifest without the fields that legitimately differ between runs."""
        d = self.to_dict()
        for key in ("run_id", "started_at", "finished_at"):
            d.pop(key)
        d["provenance"].pop("collected_at")
        return d

    @property
    def flags(self) -> int:
        return sum(s.flags for s in self.stages)


@dataclass
class RunContext:
    config: Config
    layout: StoreLayout
    now: int
    market: SimulatedMarket | None = None
    client: Client | None = None


def market_settings(config: Config) -> MarketSettings:
    s = config.simulation
    return MarketSettings(
        auctions=s.auctions,
        lot_range=tuple(s.lot_range),
        lot_fraction=tuple(s.lot_fraction) if s.lot_fraction else None,
        bidder_range=tuple(s.bidder_range),
        mix=dict(s.mix),
        duration_days=tuple(s.duration_days),
        albums=s.albums,
        rows_per_album=tuple(s.rows_per_album),
        retail_categories=s.retail_categories,
        retailers=s.retailers,
        products_per_category=tuple(s.products_per_category),
        quotes_per_product=tuple(s.quotes_per_product),
    )


def _flag(ctx: RunContext, records: list) -> int:
    findings = find_anomalies(records)
    ctx.layout.queue().add(ReviewItem.new(reason, ref, detail, ctx.now) for reason, ref, detail in findings)
    return len(findings)


# ------------------------------------------------------------------ harvest


def _connect(ctx: RunContext) -> tuple[Client, HostRateLimiter | None]:
    h = ctx.config.harvest
    if h.url:
        client = HttpClient(h.url)
        for mode, count in sorted(h.inject.items()):
            if count:
                client._control(f"/control/fail?mode={mode}&count={count}")
        return client, HostRateLimiter(h.rate)
    if ctx.market is None:
        ctx.market = build_market(market_settings(ctx.config), ctx.config.seed)
    for mode, count in sorted(h.inject.items()):
        if count:
            ctx.market.inject(mode, count)
    # in-process calls never touch a network host, so they are not throttled
    return LocalClient(ctx.market), None


def stage_harvest(ctx: RunContext) -> StageOutcome:
    h = ctx.config.harvest
    client, limiter = ctx.client, None
    if client is None:
        client, limiter = _connect(ctx)
    retry = RetryPolicy(max_retries=h.retries, base_delay=h.backoff)
    archive = ctx.layout.archive()
    info = client.target_info()
    by_kind: dict[str, list[str]] = {}
    for tid in sorted(info):
        by_kind.setdefault(info[tid]["kind"], []).append(tid)

    def store(result) -> CaptureResult:
        out = CaptureResult()
        for item in result if isinstance(result, list) else [result]:
            if isinstance(item, GapRecord):
                archive.put_gap(item)
                out.gaps.append(item)
            else:
                archive.put(item)
                out.documents.append(item)
        return out

    results: dict[str, CaptureResult] = {}

    # static listings: one capture each at the listing's publication time
    searches = by_kind.get("search", [])
    if searches:
        opened = info[searches[0]]["opens"]
        day = datetime.fromtimestamp(opened, tz=timezone.utc).date()
        window = tuple(dtime.fromisoformat(x) for x in h.window) if h.window else None
        plan = plan_schedule(day, window, Watchlist(frozenset(searches)), ctx.config.seed)
        client.advance_to(opened)
        for tid in plan.item_order:
            results[tid] = store(fetch(Target(tid, info[tid]["path"]), client, limiter, retry, at=opened))
    for kind in ("quotes", "retailer"):
        tids = by_kind.get(kind, [])
        if not tids:
            continue
        client.advance_to(info[tids[0]]["opens"])
        jobs = [
            (lambda tid=tid: fetch(Target(tid, info[tid]["path"]), client, limiter, retry, at=info[tid]["opens"]))
            for tid in tids
        ]
        for tid, res in zip(tids, harvest_parallel(jobs, h.workers)):
            results[tid] = store(res)

    # auctions: a snapshot series each, run in parallel on per-auction clocks
    def capture(tid: str) -> CaptureResult:
        meta = info[tid]
        return capture_series(
            Target(tid, meta["path"]),
            client,
            meta["key"],
            start=meta["opens"],
            interval=h.interval if h.mode == "interval" else None,
            per_event=h.mode == "event",
            limiter=limiter,
            retry=retry,
            archive=archive,
            max_cycles=MAX_INTERVAL_CYCLES,
        )

    auctions = by_kind.get("auction", [])
    for tid, res in zip(auctions, harvest_parallel([lambda t=t: capture(t) for t in auctions], h.workers)):
        results[tid] = res

    rows = [
        {
            "target": tid,
            "kind": info[tid]["kind"],
            "key": info[tid]["key"],
            "documents": len(results[tid].documents),
            "gaps": len(results[tid].gaps),
        }
        for tid in sorted(results)
    ]
    write_jsonl(ctx.layout.records("harvest"), rows)
    docs = sum(r["documents"] for r in rows)
    gaps = sum(r["gaps"] for r in rows)
    return StageOutcome("harvest", len(rows), docs, gaps, {"targets": len(rows), "gaps": gaps})


# ------------------------------------------------------------------ extract


def stage_extract(ctx: RunContext) -> StageOutcome:
    rules = {k: load_rules(k) for k in RecordKind}
    archive = ctx.layout.archive()
    snapshots: list[AuctionSnapshot] = []
    observations: list[SearchObservation] = []
    quotes: list[PriceQuote] = []
    retailers: list[RetailerProfile] = []
    malformed: list[Malformed] = []
    n_docs = 0
    for row in read_jsonl(ctx.layout.records("harvest")):
        for doc in archive.documents(row["target"]):
            n_docs += 1
            if row["kind"] == "auction":
                out = extract_auction(doc, rules[RecordKind.AUCTION_PAGE])
                if not isinstance(out, Malformed):
                    snapshots.append(out)
            elif row["kind"] == "search":
                out = extract_search(doc, rules[RecordKind.SEARCH_RESULTS])
                if not isinstance(out, Malformed):
                    observations.extend(out)
            else:
                out = extract_quotes(doc, rules[RecordKind.QUOTE_PAGE])
                if not isinstance(out, Malformed):
                    quotes.extend(out[0])
                    if out[1] is not None:
                        retailers.append(out[1])
            if isinstance(out, Malformed):
                malformed.append(out)
    L = ctx.layout
    write_jsonl(L.records("snapshots"), (s.to_dict() for s in snapshots))
    write_jsonl(L.records("observations"), (o.to_dict() for o in observations))
    write_jsonl(L.records("quotes"), (q.to_dict() for q in quotes))
    write_jsonl(L.records("retailers"), (r.to_dict() for r in retailers))
    write_jsonl(L.records("malformed"), (m.to_dict() for m in malformed))
    out_count = len(snapshots) + len(observations) + len(quotes) + len(retailers)
    flags = _flag(ctx, malformed)
    return StageOutcome(
        "extract",
        n_docs,
        out_count,
        flags,
        {
            "snapshots": len(snapshots),
            "observations": len(observations),
            "quotes": len(quotes),
            "retailers": len(retailers),
            "malformed": len(malformed),
        },
    )


# ------------------------------------------------------------------ cleanse


def _load_extracted(layout: StoreLayout):
    snapshots = [AuctionSnapshot.from_dict(d) for d in read_jsonl(layout.records("snapshots"))]
    observations = [SearchObservation(**d) for d in read_jsonl(layout.records("observations"))]
    quotes = [PriceQuote.from_dict(d) for d in read_jsonl(layout.records("quotes"))]
    retailers = [RetailerProfile.from_dict(d) for d in read_jsonl(layout.records("retailers"))]
    return snapshots, observations, quotes, retailers


def stage_cleanse(ctx: RunContext) -> StageOutcome:
    cfg = ctx.config
    snapshots, observations, quotes, retailers = _load_extracted(ctx.layout)
    records_in = len(snapshots) + len(observations) + len(quotes) + len(retailers)

    # records failing a semantic check go to review and stay out of analysis
    flags = _flag(ctx, [*snapshots, *quotes, *retailers])
    bad_refs = {
        ref
        for reason, ref, _ in find_anomalies([*snapshots, *quotes, *retailers])
        if reason in (ReasonCode.IMPOSSIBLE_VALUE, ReasonCode.DUPLICATE_KEY)
    }
    snapshots = [s for s in snapshots if _ref(s) not in bad_refs]
    quotes = [q for q in quotes if _ref(q) not in bad_refs]
    retailers = [r for r in retailers if _ref(r) not in bad_refs]

    valid, verdicts = cleanse_auctions(snapshots)
    events: list[BidEvent] = []
    profiles: list[BidderProfile] = []
    kept: list[BidderProfile] = []
    frivolous: list[BidderProfile] = []
    auctions = []
    for aid, series in valid.items():
        evs = infer_events(series)
        profs = profiles_from_events(evs)
        alloc = final_allocation(series)
        ok, friv = filter_frivolous(profs, alloc, cfg.cleanse.frivolous_fraction)
        events += evs
        profiles += profs
        kept += ok
        frivolous += friv
        last = series[-1]
        auctions.append(
            {
                "auction_id": aid,
                "category": last.product.category,
                "lot_size": last.lot_size,
                "opened": last.scheduled_open,
                "ends": last.ends,
                "closed_seen": any(s.closed for s in series),
                "captures": len(series),
                "winners": sorted(alloc.winner_ids()),
            }
        )

    profiles_by_id = {r.retailer_id: with_channel(r) for r in retailers}
    as_of = max((datetime.fromtimestamp(q.capture_time, tz=timezone.utc).date() for q in quotes), default=date(1970, 1, 1))
    analyzable = filter_quotes(
        quotes,
        profiles_by_id,
        as_of,
        Thresholds(cfg.quotes.min_quotes_per_product, cfg.quotes.min_products_per_category),
    )

    L = ctx.layout
    write_jsonl(L.records("verdicts"), (v.to_dict() for v in verdicts))
    write_jsonl(L.records("auctions"), auctions)
    write_jsonl(L.records("events"), (e.to_dict() for e in events))
    write_jsonl(L.records("profiles"), (p.to_dict() for p in profiles))
    write_jsonl(L.records("valid_profiles"), (p.to_dict() for p in kept))
    write_jsonl(L.records("frivolous"), (p.to_dict() for p in frivolous))
    write_jsonl(L.records("retailers_classified"), (profiles_by_id[k].to_dict() for k in sorted(profiles_by_id)))
    write_jsonl(L.records("analyzable_quotes"), (q.to_dict() for q in analyzable.quotes))
    write_jsonl(L.records("tallies"), (t.table_row() for t in analyzable.tallies))

    flags += _flag(ctx, [*verdicts, *profiles])
    status = Counter(v.status.value for v in verdicts)
    return StageOutcome(
        "cleanse",
        records_in,
        len(kept) + len(observations) + len(analyzable.quotes),
        flags,
        {
            "auctions": dict(sorted(status.items())),
            "bidders": len(profiles),
            "frivolous": len(frivolous),
            "quotes_dropped": analyzable.dropped,
        },
    )


# ------------------------------------------------------------------ collate


def stage_collate(ctx: RunContext) -> StageOutcome:
    L = ctx.layout
    kept = list(read_jsonl(L.records("valid_profiles")))
    observations = list(read_jsonl(L.records("observations")))
    quotes = list(read_jsonl(L.records("analyzable_quotes")))
    records_in = len(kept) + len(observations) + len(quotes)

    auctions = {a["auction_id"]: a for a in read_jsonl(L.records("auctions"))}
    keep = {(p["auction_id"], p["bidder_id"]) for p in kept}
    events = [BidEvent(**e) for e in read_jsonl(L.records("events")) if (e["auction_id"], e["bidder_id"]) in keep]
    records = bid_records(
        events,
        {a: m["category"] for a, m in auctions.items()},
        {a: set(m["winners"]) for a, m in auctions.items()},
    )
    rows = []
    totals = {}
    for level in Level:
        table = collate(records, level)
        totals[level.value] = (sum(r.bids for r in table), sum(r.amount for r in table))
        rows += [r.to_dict(level) for r in table]
    if len(set(totals.values())) > 1:
        raise AssertionError(f"collation lost records: {totals}")

    by_album: dict[str, list[dict]] = {}
    for o in observations:
        by_album.setdefault(o["query_album"], []).append(o)
    for album, obs in sorted(by_album.items()):
        rows.append(
            {"level": "Album", "key": album, "files": len(obs), "users": len({o["sharer_id"] for o in obs})}
        )
    by_product: dict[str, list[dict]] = {}
    for q in quotes:
        by_product.setdefault(q["product_id"], []).append(q)
    for pid, qs in sorted(by_product.items()):
        rows.append({"level": "Product", "key": pid, "category": qs[0]["category"], "quotes": len(qs)})

    write_jsonl(L.records("collated"), rows)
    return StageOutcome("collate", records_in, len(rows), 0, {"bids": totals.get(Level.BID.value, (0, 0))[0]})


# ------------------------------------------------------------------ analyze


def stage_analyze(ctx: RunContext) -> StageOutcome:
    cfg = ctx.config
    L = ctx.layout
    records_in = sum(1 for _ in read_jsonl(L.records("collated")))
    auctions = {a["auction_id"]: a for a in read_jsonl(L.records("auctions"))}
    kept = [BidderProfile.from_dict(p) for p in read_jsonl(L.records("valid_profiles"))]

    features = []
    for p in kept:
        meta = auctions[p.auction_id]
        if meta["opened"] is None or meta["ends"] is None:
            continue
        try:
            features.append(bidder_features(p, meta["opened"], meta["ends"]))
        except ValueError as exc:
            logger.warning("skipping %s/%s: %s", p.auction_id, p.bidder_id, exc)

    taxonomy_rows: list[dict] = []
    assignments: list[dict] = []
    summary: dict = {}
    manual: list[ReviewItem] = []
    lo, hi = cfg.analysis.k_range
    try:
        result = bidder_taxonomy(features, range(lo, hi + 1), seed=cfg.seed, k=cfg.analysis.k)
    except (ClusteringError, ValueError) as exc:
        logger.info("taxonomy skipped: %s", exc)
        result = None
    if result is not None:
        taxonomy_rows = result.rows()
        for f, lab in zip(result.features, result.point_labels):
            assignments.append(
                {
                    "auction_id": f.auction_id,
                    "bidder_id": f.bidder_id,
                    "entry_norm": f.entry_norm,
                    "exit_norm": f.exit_norm,
                    "bid_count": f.bid_count,
                    "label": lab.value,
                }
            )
            if lab is TaxonomyLabel.OTHER:
                manual.append(
                    ReviewItem.new(
                        ReasonCode.MANUAL_CLASSIFY_NEEDED,
                        f"bidder:{f.auction_id}/{f.bidder_id}",
                        "cluster centroid fits none of the three strategy groups",
                        ctx.now,
                    )
                )
        summary["taxonomy"] = {
            "k": result.clustering.k,
            "silhouette": round(result.silhouette, 6) if result.silhouette == result.silhouette else None,
            "proportions": {lab.value: round(v, 6) for lab, v in result.proportions().items()},
        }

    quotes = [PriceQuote.from_dict(q) for q in read_jsonl(L.records("analyzable_quotes"))]
    dispersion = [r.row() for r in dispersion_table(quotes)]
    tallies = list(read_jsonl(L.records("tallies")))

    observations = [SearchObservation(**o) for o in read_jsonl(L.records("observations"))]
    if observations:
        c = corpus_summary([observations])
        summary["corpus"] = {"users": c.users, "files": c.files, "files_per_user": round(c.files_per_user, 6)}

    write_jsonl(L.records("taxonomy"), taxonomy_rows)
    write_jsonl(L.records("taxonomy_assignments"), assignments)
    write_jsonl(L.records("dispersion"), dispersion)
    write_json(L.records_dir / "analysis.json", summary)
    ctx.layout.queue().add(manual)
    out = len(taxonomy_rows) + len(dispersion) + len(tallies)
    return StageOutcome("analyze", records_in, out, len(manual), summary)


# ------------------------------------------------------------------ report


def stage_report(ctx: RunContext) -> StageOutcome:
    L = ctx.layout
    plots = ctx.config.report.plots
    datasets = {
        ReportKind.TABLE4_TALLY: list(read_jsonl(L.records("tallies"))),
        ReportKind.TAXONOMY_SUMMARY: list(read_jsonl(L.records("taxonomy"))),
        ReportKind.DISPERSION_TABLE: list(read_jsonl(L.records("dispersion"))),
    }
    rows = sum(len(d) for d in datasets.values())
    files = []
    for kind, data in datasets.items():
        files += emit_report(data, kind, L.reports_dir, plots=plots)
    if plots:
        assignments = list(read_jsonl(L.records("taxonomy_assignments")))
        if assignments:
            files.append(
                plot_taxonomy(
                    [(a["entry_norm"], a["exit_norm"]) for a in assignments],
                    [a["label"] for a in assignments],
                    L.reports_dir / "taxonomy.png",
                )
            )
    return StageOutcome("report", rows, rows, 0, {"files": sorted(p.name for p in files)})


STAGE_FUNCS: dict[str, Callable[[RunContext], StageOutcome]] = {
    "harvest": stage_harvest,
    "extract": stage_extract,
    "cleanse": stage_cleanse,
    "collate": stage_collate,
    "analyze": stage_analyze,
    "report": stage_report,
}

# record set each stage needs when its producer is not part of the same invocation
STAGE_INPUT = {
    "extract": "harvest",
    "cleanse": "snapshots",
    "collate": "valid_profiles",
    "analyze": "collated",
    "report": "taxonomy",
}


def run_stages(
    config: Config,
    stages: tuple[str, ...] = STAGES,
    market: SimulatedMarket | None = None,
    client: Client | None = None,
) -> RunManifest:
    """Run ``stages`` in pipeline order against the store at ``config.out``."""
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stage(s): {unknown}")
    config.validate()
    layout = StoreLayout(Path(config.out)).ensure()
    first = next(s for s in STAGES if s in stages) if stages else None
    needed = STAGE_INPUT.get(first)
    if needed and not layout.records(needed).exists():
        raise ConfigError(f"stage {first} needs {needed} records in {layout.records_dir}; run the earlier stages first")
    started = int(time.time())
    ctx = RunContext(config, layout, started, market=market, client=client)
    outcomes = []
    for name in STAGES:
        if name in stages:
            logger.info("stage %s", name)
            outcomes.append(STAGE_FUNCS[name](ctx))
    finished = int(time.time())
    manifest = RunManifest(
        run_id=uuid.uuid4().hex[:12],
        started_at=iso(started),
        finished_at=iso(finished),
        config_digest=config.digest(),
        seed=config.seed,
        stages=outcomes,
        provenance=DatasetProvenance(SourceKind.SIMULATION, started, "ecomlab harvester"),
        summary=next((o.detail for o in outcomes if o.stage == "analyze"), {}),
    )
    write_json(layout.manifests_dir / f"{manifest.run_id}.json", manifest.to_dict())
    return manifest


def run_pipeline(config: Config, market: SimulatedMarket | None = None, client: Client | None = None) -> RunManifest:
    """Harvest, extract, cleanse, collate, analyze and report in one go."""
    return run_stages(config, STAGES, market=market, client=client)
