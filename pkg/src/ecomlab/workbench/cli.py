"""Command line: ``ecomlab <command> [--config FILE] [--seed N] [--out DIR] ...``.

Exit codes: 0 success, 1 usage error (bad arguments, config, query or
review id), 2 the command finished but wrote review items that need a look.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from ..market import ConfigError
from ..pipeline.review import ReviewError
from ..simulator.build import build_market
from ..simulator.service import ServiceStartError, serve
from .config import Config, load_config
from .query import QueryError, query
from .run import RunManifest, market_settings, run_stages
from .store import StoreLayout

logger = logging.getLogger("ecomlab")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# which pipeline stages each stage command runs; collating is part of cleansing
STAGE_COMMANDS = {
    "harvest": ("harvest",),
    "extract": ("extract",),
    "cleanse": ("cleanse", "collate"),
    "analyze": ("analyze",),
    "report": ("report",),
    "run": ("harvest", "extract", "cleanse", "collate", "analyze", "report"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means "data error" here
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file (keys documented in ecomlab.workbench.config)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # same flags for nested actions; suppressed defaults keep them from resetting the outer ones
    nested = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    nested.add_argument("--config", type=Path)
    nested.add_argument("--seed", type=int)
    nested.add_argument("--out")
    nested.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ecomlab", description="Harvest, cleanse and analyze simulated online market data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="write the simulated market's pages and ground truth")
    sp = sub.add_parser("serve", parents=[common], help="serve the simulated market over HTTP")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--duration", type=float, default=None, help="stop after this many seconds (default: until ^C)")

    for name, help_text in (
        ("harvest", "capture pages into the raw archive"),
        ("extract", "turn archived pages into records"),
        ("cleanse", "validate, reconstruct bids and collate"),
        ("analyze", "cluster bidders, measure dispersion"),
        ("report", "write CSV tables (and plots)"),
        ("run", "all stages end to end"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)

    qp = sub.add_parser("query", parents=[common], help="filter a record set, one JSON object per line")
    qp.add_argument("records", help="record set name, e.g. profiles or snapshots")
    qp.add_argument("predicate", nargs="*", help='e.g. bid_count > 3 and auction_id = A0001')
    qp.add_argument("--count", action="store_true", help="print only the number of matches")

    rp = sub.add_parser("review", parents=[common], help="list or resolve review items")
    rsub = rp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    lp = rsub.add_parser("list", parents=[nested], help="show unresolved items")
    lp.add_argument("--all", action="store_true", help="include resolved items")
    res = rsub.add_parser("resolve", parents=[nested], help="mark an item resolved")
    res.add_argument("item_id")
    res.add_argument("note")
    return p


def _config(args) -> Config:
    return load_config(args.config, seed=args.seed, out=args.out)


def _print_manifest(m: RunManifest) -> None:
    for s in m.stages:
        print(f"{s.stage:<8} in={s.records_in:<7} out={s.records_out:<7} flags={s.flags}")
    print(f"run {m.run_id} config {m.config_digest} seed {m.seed}")


def cmd_stage(args) -> int:
    cfg = _config(args)
    manifest = run_stages(cfg, STAGE_COMMANDS[args.command])
    _print_manifest(manifest)
    if manifest.flags:
        print(f"{manifest.flags} review item(s) written; see 'ecomlab review list'", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    market = build_market(market_settings(cfg), cfg.seed)
    root = Path(cfg.out) / "simulation"
    n = market.dump(root)
    print(f"wrote {n} pages under {root}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _config(args)
    market = build_market(market_settings(cfg), cfg.seed)
    try:
        service = serve(market, args.host, args.port)
    except ServiceStartError as exc:
        raise UsageError(str(exc)) from None
    print(f"serving {len(market.targets())} targets on {service.url}", flush=True)
    stop = threading.Event()
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _config(args)
    rows = query(StoreLayout(Path(cfg.out)), args.records, " ".join(args.predicate))
    if args.count:
        print(sum(1 for _ in rows))
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    return EXIT_OK


def cmd_review(args) -> int:
    cfg = _config(args)
    layout = StoreLayout(Path(cfg.out))
    queue = layout.queue()
    if args.action == "list":
        items = list(queue.items().values()) if args.all else queue.unresolved()
        for it in items:
            print(json.dumps(it.to_dict(), sort_keys=True))
        return EXIT_OK
    item = queue.resolve(args.item_id, args.note)
    print(json.dumps(item.to_dict(), sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "serve": cmd_serve,
    "query": cmd_query,
    "review": cmd_review,
    **{name: cmd_stage for name in STAGE_COMMANDS},
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ecomlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, QueryError, ReviewError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"ecomlab: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
