"""The simulated market as a request/response service.

``SimulatedMarket`` answers paths the way a live site would, against a
virtual clock, with scripted failures. ``serve`` puts it behind a local
HTTP endpoint; ``LocalClient`` calls it in-process for fast tests.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from ..market import Timestamp, auction_end_time, format_money, iso, min_required_bid
from .auction import GroundTruthLog
from .p2p import P2PCorpus
from .retail import RetailMarket
from .templates import AUCTION_TEMPLATE, render_page

logger = logging.getLogger(__name__)

FAILURE_MODES = ("drop", "error", "garble")


class ServiceStartError(RuntimeError):
    pass


class DroppedResponse(Exception):
    """The service swallowed the request; clients see a timeout."""


@dataclass(frozen=True)
class Response:
    status: int
    body: bytes
    sim_time: Timestamp | None = None
    content_type: str = "text/html; charset=utf-8"


def auction_page_state(log: GroundTruthLog, t: Timestamp) -> dict:
    """What the auction page shows at time ``t``: current winners only.

    ``ends`` is the closing time implied by the bids accepted so far, which
    moves past the scheduled close while the soft-close window keeps
    getting refreshed.
    """
    cfg = log.auction
    standing = log.allocation_at(t)
    ends = auction_end_time(cfg, [ts for ts in log.change_times() if ts <= t])
    return {
        "status": "closed" if t >= log.end_time else "open",
        "auction_id": cfg.auction_id,
        "title": cfg.product.title,
        "category": cfg.product.category,
        "condition": cfg.product.condition.value,
        "life_cycle": cfg.product.life_cycle,
        "lot_size": cfg.lot_size,
        "min_required_bid": format_money(min_required_bid(cfg, standing)),
        "bid_increment": format_money(cfg.bid_increment),
        "scheduled_open": iso(cfg.scheduled_open),
        "scheduled_close": iso(cfg.scheduled_close),
        "ends": iso(ends),
        "winners": [
            {"bidder_id": w.bidder_id, "price": format_money(w.price), "quantity": w.units}
            for w in standing.winners
        ],
    }


@dataclass
class SimulatedMarket:
    auctions: dict[str, GroundTruthLog] = field(default_factory=dict)
    p2p: P2PCorpus | None = None
    retail: RetailMarket | None = None
    clock: Timestamp = 0
    request_log: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._failures: deque[str] = deque()
        # auctions may run on their own clocks so captures can proceed in parallel
        self._auction_clocks: dict[str, Timestamp] = {}

    def inject(self, mode: str, count: int = 1) -> None:
        if mode not in FAILURE_MODES:
            raise ValueError(f"unknown failure mode {mode!r}")
        with self._lock:
            self._failures.extend([mode] * count)

    def advance_to(self, t: Timestamp, auction_id: str | None = None) -> None:
        with self._lock:
            self._set_clock(t, auction_id)

    def _set_clock(self, t: Timestamp, auction_id: str | None) -> None:
        if auction_id is None:
            self.clock = t
        else:
            self._auction_clocks[auction_id] = t

    def now(self, auction_id: str | None = None) -> Timestamp:
        return self._auction_clocks.get(auction_id, self.clock) if auction_id else self.clock

    def change_times(self, auction_id: str) -> list[Timestamp]:
        return self.auctions[auction_id].change_times()

    def handle(self, path: str) -> Response:
        """Serve one GET. All state access is serialized on one lock."""
        with self._lock:
            self.request_log.append((time.monotonic(), path))
            parts = urlsplit(path)
            query = {k: v[0] for k, v in parse_qs(parts.query).items()}
            if parts.path.startswith("/control/"):
                return self._control(parts.path, query)
            mode = self._failures.popleft() if self._failures else None
            if mode == "drop":
                raise DroppedResponse(path)
            if mode == "error":
                aid = parts.path[len("/auction/"):] if parts.path.startswith("/auction/") else None
                return Response(503, b"Service Unavailable", self.now(aid), "text/plain")
            resp = self._content(parts.path, query)
            if mode == "garble" and resp.status == 200:
                resp = Response(resp.status, resp.body[: len(resp.body) // 2], resp.sim_time)
            return resp

    def _content(self, route: str, query: dict[str, str]) -> Response:
        body: str | None = None
        now = self.clock
        if route.startswith("/auction/"):
            aid = route[len("/auction/"):]
            log = self.auctions.get(aid)
            if log is not None:
                now = self.now(aid)
                body = render_page(auction_page_state(log, now), AUCTION_TEMPLATE)
        elif route == "/search" and self.p2p is not None:
            body = self.p2p.documents.get(query.get("album", ""))
        elif route == "/quotes" and self.retail is not None:
            body = self.retail.product_pages.get(query.get("product", ""))
        elif route == "/retailer" and self.retail is not None:
            body = self.retail.retailer_pages.get(query.get("id", ""))
        if body is None:
            return Response(404, b"not found", now, "text/plain")
        return Response(200, body.encode("utf-8"), now)

    def _control(self, route: str, query: dict[str, str]) -> Response:
        try:
            if route == "/control/clock":
                self._set_clock(int(query["t"]), query.get("auction"))
                payload: object = {"clock": int(query["t"])}
            elif route == "/control/fail":
                mode, count = query["mode"], int(query.get("count", 1))
                if mode not in FAILURE_MODES:
                    raise ValueError(mode)
                self._failures.extend([mode] * count)
                payload = {"queued": len(self._failures)}
            elif route == "/control/targets":
                payload = self.target_info()
            elif route == "/control/events":
                payload = self.auctions[query["auction"]].change_times()
            else:
                return Response(404, b"unknown control", self.clock, "text/plain")
        except (KeyError, ValueError) as exc:
            return Response(400, f"bad control request: {exc}".encode(), self.clock, "text/plain")
        return Response(200, json.dumps(payload).encode(), self.clock, "application/json")

    def target_info(self) -> dict[str, dict]:
        """target id -> {path, kind, opens, captured_at} for every servable document."""
        info: dict[str, dict] = {}
        for aid, log in sorted(self.auctions.items()):
            info[f"auction-{aid}"] = {"path": f"/auction/{aid}", "kind": "auction", "key": aid, "opens": log.auction.scheduled_open}
        if self.p2p is not None:
            for album in sorted(self.p2p.documents):
                info[f"search-{album}"] = {
                    "path": f"/search?album={album}", "kind": "search", "key": album, "opens": self.p2p.captured_at,
                }
        if self.retail is not None:
            for pid in sorted(self.retail.product_pages):
                info[f"quotes-{pid}"] = {
                    "path": f"/quotes?product={pid}", "kind": "quotes", "key": pid, "opens": self.retail.captured_at,
                }
            for rid in sorted(self.retail.retailer_pages):
                info[f"retailer-{rid}"] = {
                    "path": f"/retailer?id={rid}", "kind": "retailer", "key": rid, "opens": self.retail.captured_at,
                }
        return info

    def targets(self) -> dict[str, str]:
        """target id -> path for every servable document."""
        out = {f"auction-{a}": f"/auction/{a}" for a in sorted(self.auctions)}
        if self.p2p is not None:
            out.update({f"search-{a}": f"/search?album={a}" for a in sorted(self.p2p.documents)})
        if self.retail is not None:
            out.update({f"quotes-{p}": f"/quotes?product={p}" for p in sorted(self.retail.product_pages)})
            out.update({f"retailer-{r}": f"/retailer?id={r}" for r in sorted(self.retail.retailer_pages)})
        return out

    def dump(self, root: Path) -> int:
        """Write every document (auction pages at each change) plus ground truth under ``root``."""
        root = Path(root)
        written = 0
        for aid, log in sorted(self.auctions.items()):
            d = root / "auction" / aid
            d.mkdir(parents=True, exist_ok=True)
            for t in log.change_times() + [log.end_time]:
                page = render_page(auction_page_state(log, t), AUCTION_TEMPLATE)
                (d / f"{iso(t)}.html").write_text(page, encoding="utf-8")
                written += 1
            (d / "truth.json").write_text(log.to_json(), encoding="utf-8")
        if self.p2p is not None:
            d = root / "search"
            d.mkdir(parents=True, exist_ok=True)
            for album, page in sorted(self.p2p.documents.items()):
                (d / f"{album}.html").write_text(page, encoding="utf-8")
                written += 1
            (d / "truth.json").write_text(json.dumps(self.p2p.truth_counts, sort_keys=True), encoding="utf-8")
        if self.retail is not None:
            for kind, pages in (("quotes", self.retail.product_pages), ("retailer", self.retail.retailer_pages)):
                d = root / kind
                d.mkdir(parents=True, exist_ok=True)
                for key, page in sorted(pages.items()):
                    (d / f"{key}.html").write_text(page, encoding="utf-8")
                    written += 1
        return written


class _Handler(BaseHTTPRequestHandler):
    market: SimulatedMarket

    def do_GET(self) -> None:  # noqa: N802 (http.server naming)
        try:
            resp = self.market.handle(self.path)
        except DroppedResponse:
            self.close_connection = True
            return
        self.send_response(resp.status)
        self.send_header("Content-Type", resp.content_type)
        self.send_header("Content-Length", str(len(resp.body)))
        if resp.sim_time is not None:
            self.send_header("X-Sim-Time", str(resp.sim_time))
        self.end_headers()
        self.wfile.write(resp.body)

    do_POST = do_GET

    def log_message(self, format: str, *args) -> None:
        logger.debug("sim-server: " + format, *args)


@dataclass
class RunningService:
    server: ThreadingHTTPServer
    thread: threading.Thread
    market: SimulatedMarket

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)

    def __enter__(self) -> RunningService:
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(market: SimulatedMarket, host: str = "127.0.0.1", port: int = 0) -> RunningService:
    """Start serving ``market`` on a background thread. Port 0 picks a free port."""
    handler = type("MarketHandler", (_Handler,), {"market": market})
    try:
        server = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise ServiceStartError(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, name="sim-server", daemon=True)
    thread.start()
    logger.info("simulated market serving on %s:%s", *server.server_address[:2])
    return RunningService(server, thread, market)
