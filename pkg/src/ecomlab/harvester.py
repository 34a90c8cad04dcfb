"""Polite, scheduled collection of raw documents.

Covers randomized daily scheduling over a monotone watchlist, per-host token
bucket rate limiting, retrying fetches that end in either a document or a
gap record, snapshot series capture, and the append-only raw archive.
"""

from __future__ import annotations

import enum
import hashlib
import http.client
import json
import logging
import random
import socket
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, time as dtime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol
from urllib.parse import urlsplit

from .market import Timestamp, from_iso, iso
from .simulator.service import DroppedResponse, Response, SimulatedMarket

logger = logging.getLogger(__name__)


class PlanningError(ValueError):
    pass


class FetchStatus(str, enum.Enum):
    OK = "OK"
    TIMEOUT = "Timeout"
    SERVER_ERROR = "ServerError"
    GARBLED = "Garbled"


# ---------------------------------------------------------------- scheduling


@dataclass(frozen=True)
class Watchlist:
    """Tracked items; grows only."""

    items: frozenset[str] = frozenset()
    added_on: dict[str, date] = field(default_factory=dict)

    def __contains__(self, item: str) -> bool:
        return item in self.items

    def __len__(self) -> int:
        return len(self.items)


def update_watchlist(watchlist: Watchlist, chart: Iterable[str], on: date) -> Watchlist:
    """Union the current chart into the watchlist; nothing is ever removed."""
    added = dict(watchlist.added_on)
    for item in chart:
        added.setdefault(item, on)
    return Watchlist(frozenset(watchlist.items) | frozenset(added), added)


@dataclass(frozen=True)
class SchedulePlan:
    day: date
    trigger_time: datetime
    item_order: tuple[str, ...]
    seed: int


def plan_schedule(
    day: date,
    window: tuple[dtime, dtime] | None,
    watchlist: Watchlist,
    seed: int,
) -> SchedulePlan:
    """Pick a uniform trigger inside ``window`` and a uniform item order.

    ``window`` is a half-open [start, end) range of wall-clock times on ``day``
    (UTC); ``None`` means the whole day. The draw depends only on
    (seed, day, watchlist contents).
    """
    if not watchlist.items:
        raise PlanningError("cannot plan a run over an empty watchlist")
    start = datetime.combine(day, window[0] if window else dtime(0), tzinfo=timezone.utc)
    if window and window[1] != dtime(0):
        end = datetime.combine(day, window[1], tzinfo=timezone.utc)
    else:
        end = datetime.combine(day + timedelta(days=1), dtime(0), tzinfo=timezone.utc)
    if end <= start:
        raise PlanningError(f"empty schedule window {window}")
    rng = random.Random(f"{seed}:{day.isoformat()}")
    span = (end - start).total_seconds()
    trigger = start + timedelta(seconds=rng.random() * span)
    order = sorted(watchlist.items)
    rng.shuffle(order)
    return SchedulePlan(day, trigger, tuple(order), seed)


# ------------------------------------------------------------ rate limiting


class TokenBucket:
    """Thread-safe token bucket.

    ``capacity`` of 1 means requests are spaced at least ``1/rate`` apart.
    ``slack`` widens that spacing by a fraction to absorb transport jitter,
    so the rate seen at the server stays under ``rate``.
    """

    def __init__(
        self,
        rate: float,
        capacity: float = 1.0,
        slack: float = 0.01,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity
        self._refill = rate / (1.0 + slack)
        self._tokens = capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Block until a token is available; returns seconds waited."""
        waited = 0.0
        with self._lock:
            while True:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self._refill)
                self._stamp = now
                # tolerance: float refill can stall a hair below 1.0 forever
                if self._tokens >= 1.0 - 1e-9:
                    self._tokens = max(0.0, self._tokens - 1.0)
                    return waited
                pause = (1.0 - self._tokens) / self._refill
                self._sleep(pause)
                waited += pause


class HostRateLimiter:
    """One token bucket per host, created on first use."""

    def __init__(self, rate: float, **bucket_kwargs):
        self.rate = rate
        self._kwargs = bucket_kwargs
        self._buckets: dict[str, TokenBucket] = {}
        self._lock = threading.Lock()

    def bucket(self, host: str) -> TokenBucket:
        with self._lock:
            if host not in self._buckets:
                self._buckets[host] = TokenBucket(self.rate, **self._kwargs)
            return self._buckets[host]

    def acquire(self, host: str) -> float:
        return self.bucket(host).acquire()


# ------------------------------------------------------------------ clients


class FetchTimeout(Exception):
    pass


class Client(Protocol):
    host: str

    def get(self, path: str) -> Response: ...

    def advance_to(self, t: Timestamp, auction_id: str | None = None) -> None: ...

    def change_times(self, auction_id: str) -> list[Timestamp]: ...

    def target_info(self) -> dict[str, dict]: ...


class LocalClient:
    """Calls a ``SimulatedMarket`` in-process."""

    host = "local"

    def __init__(self, market: SimulatedMarket):
        self.market = market

    def get(self, path: str) -> Response:
        try:
            return self.market.handle(path)
        except DroppedResponse as exc:
            raise FetchTimeout(path) from exc

    def advance_to(self, t: Timestamp, auction_id: str | None = None) -> None:
        self.market.advance_to(t, auction_id)

    def change_times(self, auction_id: str) -> list[Timestamp]:
        return self.market.change_times(auction_id)

    def target_info(self) -> dict[str, dict]:
        return self.market.target_info()


class HttpClient:
    """Talks to a served simulator (or any host with the same paths)."""

    def __init__(self, base_url: str, timeout: float = 2.0):
        self.base_url = base_url.rstrip("/")
        self.host = urlsplit(self.base_url).netloc
        self.timeout = timeout

    def get(self, path: str) -> Response:
        try:
            with urllib.request.urlopen(self.base_url + path, timeout=self.timeout) as r:
                body = r.read()
                stamp = r.headers.get("X-Sim-Time")
                return Response(r.status, body, int(stamp) if stamp else None, r.headers.get_content_type())
        except urllib.error.HTTPError as exc:
            stamp = exc.headers.get("X-Sim-Time") if exc.headers else None
            return Response(exc.code, exc.read(), int(stamp) if stamp else None)
        except (socket.timeout, TimeoutError, http.client.RemoteDisconnected, ConnectionError) as exc:
            raise FetchTimeout(path) from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError, ConnectionError)):
                raise FetchTimeout(path) from exc
            raise

    def _control(self, path: str):
        resp = self.get(path)
        if resp.status != 200:
            raise RuntimeError(f"control call {path} failed with {resp.status}")
        return json.loads(resp.body)

    def advance_to(self, t: Timestamp, auction_id: str | None = None) -> None:
        suffix = f"&auction={auction_id}" if auction_id else ""
        self._control(f"/control/clock?t={t}{suffix}")

    def change_times(self, auction_id: str) -> list[Timestamp]:
        return self._control(f"/control/events?auction={auction_id}")

    def target_info(self) -> dict[str, dict]:
        return self._control("/control/targets")


# ---------------------------------------------------------------- fetching


@dataclass(frozen=True)
class Target:
    target_id: str
    path: str


@dataclass(frozen=True)
class RawDocument:
    target: str
    capture_time: Timestamp
    body: bytes
    fetch_status: FetchStatus
    attempt: int

    def __post_init__(self) -> None:
        if self.fetch_status is FetchStatus.OK and not self.body:
            raise ValueError("an OK document must have a body")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.body).hexdigest()


@dataclass(frozen=True)
class GapRecord:
    target: str
    window: tuple[Timestamp, Timestamp]
    reason: str

    def __post_init__(self) -> None:
        if not self.window[0] < self.window[1]:
            raise ValueError(f"gap window {self.window} is empty")


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 2
    base_delay: float = 0.5
    factor: float = 2.0

    def delays(self) -> list[float]:
        return [self.base_delay * self.factor**i for i in range(self.max_retries)]


def looks_garbled(body: bytes) -> bool:
    """Truncated or undecodable HTML; archived anyway and flagged downstream."""
    if not body:
        return True
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError:
        return True
    tail = text.rstrip()[-16:].lower()
    return "<html" in text[:200].lower() and not tail.endswith("</html>")


def fetch(
    target: Target,
    client: Client,
    limiter: HostRateLimiter | None = None,
    retry: RetryPolicy = RetryPolicy(),
    gap_span: int = 1,
    sleep: Callable[[float], None] = time.sleep,
    at: Timestamp | None = None,
) -> RawDocument | GapRecord:
    """Fetch one target, retrying timeouts and 5xx with exponential backoff.

    Exhausted retries produce a ``GapRecord`` covering ``gap_span`` seconds
    from ``at`` (the capture cycle's time) when given, else from the
    service's clock, else from wall-clock time.
    """
    delays = retry.delays()
    last_reason = ""
    sim_time: Timestamp | None = None
    for attempt in range(1, retry.max_retries + 2):
        if limiter is not None:
            limiter.acquire(client.host)
        try:
            resp = client.get(target.path)
        except FetchTimeout:
            last_reason = FetchStatus.TIMEOUT.value
        else:
            sim_time = resp.sim_time if resp.sim_time is not None else int(time.time())
            if resp.status == 200:
                status = FetchStatus.GARBLED if looks_garbled(resp.body) else FetchStatus.OK
                return RawDocument(target.target_id, sim_time, resp.body, status, attempt)
            if resp.status >= 500:
                last_reason = f"{FetchStatus.SERVER_ERROR.value} {resp.status}"
            else:
                # 4xx will not improve on retry
                start = at if at is not None else sim_time
                return GapRecord(target.target_id, (start, start + gap_span), f"HTTP {resp.status}")
        if attempt <= retry.max_retries:
            logger.debug("retrying %s after %s (attempt %d)", target.target_id, last_reason, attempt)
            sleep(delays[attempt - 1])
    start = at if at is not None else sim_time if sim_time is not None else int(time.time())
    return GapRecord(
        target.target_id,
        (start, start + gap_span),
        f"{last_reason} after {retry.max_retries + 1} attempts",
    )


# ----------------------------------------------------------------- archive


class ArchiveStore:
    """Append-only raw archive.

    Layout: ``<root>/<target>/<capture_time ISO>.raw`` with one JSON line per
    document appended to ``<root>/<target>/index.jsonl`` and gap records in
    ``<root>/<target>/gaps.jsonl``. An existing entry is never overwritten;
    re-archiving identical bytes is a no-op.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, target: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(target, threading.Lock())

    def put(self, doc: RawDocument) -> Path:
        d = self.root / doc.target
        with self._lock(doc.target):
            d.mkdir(parents=True, exist_ok=True)
            stem = iso(doc.capture_time)
            n = 0
            while True:
                name = f"{stem}.raw" if n == 0 else f"{stem}.{n}.raw"
                path = d / name
                if not path.exists():
                    break
                if hashlib.sha256(path.read_bytes()).hexdigest() == doc.digest:
                    return path
                n += 1
            path.write_bytes(doc.body)
            meta = {
                "target": doc.target,
                "capture_time": stem,
                "status": doc.fetch_status.value,
                "attempt": doc.attempt,
                "digest": doc.digest,
                "file": name,
            }
            with open(d / "index.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(meta, sort_keys=True) + "\n")
            return path

    def put_gap(self, gap: GapRecord) -> None:
        d = self.root / gap.target
        line = json.dumps(
            {"target": gap.target, "start": iso(gap.window[0]), "end": iso(gap.window[1]), "reason": gap.reason},
            sort_keys=True,
        )
        with self._lock(gap.target):
            d.mkdir(parents=True, exist_ok=True)
            path = d / "gaps.jsonl"
            if path.exists() and line in path.read_text(encoding="utf-8").splitlines():
                return
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def targets(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "index.jsonl").exists() or (p / "gaps.jsonl").exists())

    def documents(self, target: str) -> Iterator[RawDocument]:
        index = self.root / target / "index.jsonl"
        if not index.exists():
            return
        for line in index.read_text(encoding="utf-8").splitlines():
            meta = json.loads(line)
            body = (self.root / target / meta["file"]).read_bytes()
            yield RawDocument(target, from_iso(meta["capture_time"]), body, FetchStatus(meta["status"]), meta["attempt"])

    def gaps(self, target: str) -> list[GapRecord]:
        path = self.root / target / "gaps.jsonl"
        if not path.exists():
            return []
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            g = json.loads(line)
            out.append(GapRecord(g["target"], (from_iso(g["start"]), from_iso(g["end"])), g["reason"]))
        return out


# ---------------------------------------------------------- series capture


@dataclass
class CaptureResult:
    documents: list[RawDocument] = field(default_factory=list)
    gaps: list[GapRecord] = field(default_factory=list)


def _closed(doc: RawDocument) -> bool:
    return b'<div class="status">Auction closed</div>' in doc.body


def capture_series(
    target: Target,
    client: Client,
    auction_id: str,
    start: Timestamp,
    interval: int | None = None,
    until: Timestamp | None = None,
    per_event: bool = False,
    limiter: HostRateLimiter | None = None,
    retry: RetryPolicy = RetryPolicy(),
    archive: ArchiveStore | None = None,
    sleep: Callable[[float], None] = time.sleep,
    max_cycles: int = 100_000,
) -> CaptureResult:
    """Capture an auction page repeatedly as its virtual clock advances.

    Interval mode polls at ``start + k * interval`` until the page shows the
    closed marker or ``until`` passes. Per-event mode polls once at each
    change time the service announces. Every missed cycle leaves a
    ``GapRecord``.
    """
    if not per_event and (interval is None or interval <= 0):
        raise ValueError("interval must be positive")
    result = CaptureResult()

    def cycles() -> Iterator[tuple[Timestamp, int]]:
        if per_event:
            times = client.change_times(auction_id)
            yield from zip(times, [b - a for a, b in zip(times, times[1:])] + [1])
            return
        t = start
        for _ in range(max_cycles):
            if until is not None and t > until:
                return
            yield t, interval
            t += interval

    for t, span in cycles():
        client.advance_to(t, auction_id)
        outcome = fetch(target, client, limiter, retry, gap_span=max(1, span), sleep=sleep, at=t)
        if isinstance(outcome, GapRecord):
            result.gaps.append(outcome)
            if archive is not None:
                archive.put_gap(outcome)
            continue
        result.documents.append(outcome)
        if archive is not None:
            archive.put(outcome)
        if not per_event and _closed(outcome):
            break
    return result


def harvest_parallel(
    jobs: list[Callable[[], CaptureResult | RawDocument | GapRecord]],
    workers: int = 4,
) -> list:
    """Run independent capture jobs on a bounded pool, preserving job order."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))
