"""Flat-file store: raw archive, JSONL records, CSV reports, review queue, manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from ..harvester import ArchiveStore
from ..market import from_iso, iso
from ..pipeline.review import ReviewQueue


@dataclass(frozen=True)
class StoreLayout:
    root: Path

    @property
    def raw_dir(self) -> Path:
        return self.root / "raw"

    @property
    def records_dir(self) -> Path:
        return self.root / "records"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def review_file(self) -> Path:
        return self.root / "review" / "queue.jsonl"

    @property
    def manifests_dir(self) -> Path:
        return self.root / "manifests"

    def ensure(self) -> StoreLayout:
        for d in (self.raw_dir, self.records_dir, self.reports_dir, self.review_file.parent, self.manifests_dir):
            d.mkdir(parents=True, exist_ok=True)
        return self

    def archive(self) -> ArchiveStore:
        return ArchiveStore(self.raw_dir)

    def queue(self) -> ReviewQueue:
        return ReviewQueue(self.review_file)

    def records(self, name: str) -> Path:
        return self.records_dir / f"{name}.jsonl"


# record fields holding epoch seconds; on disk they are ISO-8601 UTC strings
TIME_FIELDS = frozenset(
    {
        "capture_time",
        "observed_at",
        "observed_after",
        "entry_time",
        "exit_time",
        "scheduled_open",
        "scheduled_close",
        "ends",
        "opened",
        "placed_at",
    }
)


def encode_times(row: dict) -> dict:
    return {k: iso(v) if k in TIME_FIELDS and isinstance(v, int) and not isinstance(v, bool) else v
            for k, v in row.items()}


def decode_times(row: dict) -> dict:
    return {k: from_iso(v) if k in TIME_FIELDS and isinstance(v, str) else v for k, v in row.items()}


def write_jsonl(path: Path, rows: Iterable[dict]) -> int:
    """Replace ``path`` with one sorted-key JSON object per line; returns the row count.

    Timestamp fields are written as ISO-8601 UTC text.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(encode_times(row), sort_keys=True) + "\n")
            n += 1
    tmp.replace(path)
    return n


def read_jsonl(path: Path, raw: bool = False) -> Iterator[dict]:
    """Rows of ``path`` with timestamps back as epoch seconds (or as stored when ``raw``)."""
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                yield row if raw else decode_times(row)


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))
