"""Workbench configuration: one YAML file, every key documented and checked.

Example (all keys optional; these are the defaults)::

    seed: 0
    out: workbench-out
    simulation:
      auctions: 20
      lot_range: [1, 10]
      lot_fraction: null        # [lo, hi]: lot size as a share of the bidder count
      bidder_range: [5, 50]
      mix: {EarlyMultiple: 0.4, EarlySingle: 0.3, LateArriver: 0.3}
      duration_days: [1, 3]
      albums: 0
      rows_per_album: [0, 40]
      retail_categories: 0
      retailers: 40
      products_per_category: [22, 30]
      quotes_per_product: [9, 16]
    harvest:
      mode: event               # event: one capture per page change; interval: fixed polling
      interval: 3600            # virtual seconds between captures in interval mode
      url: null                 # served simulator to harvest over HTTP; null runs in-process
      rate: 5.0                 # max requests per second per host (HTTP only)
      retries: 2
      backoff: 0.5              # seconds before the first retry, doubling after
      workers: 4
      window: null              # ["HH:MM", "HH:MM"] trigger window for search runs
      inject: {drop: 0, error: 0, garble: 0}
    cleanse:
      frivolous_fraction: 0.8
    quotes:
      min_quotes_per_product: 7
      min_products_per_category: 20
    analysis:
      k_range: [2, 6]
      k: null                   # fix k instead of choosing it by silhouette
    report:
      plots: false
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from ..constants import FRIVOLOUS_FRACTION, MIN_PRODUCTS_PER_CATEGORY, MIN_QUOTES_PER_PRODUCT
from ..market import ConfigError


@dataclass
class SimulationConfig:
    auctions: int = 20
    lot_range: tuple[int, int] = (1, 10)
    lot_fraction: tuple[float, float] | None = None
    bidder_range: tuple[int, int] = (5, 50)
    mix: dict[str, float] = field(
        default_factory=lambda: {"EarlyMultiple": 0.4, "EarlySingle": 0.3, "LateArriver": 0.3}
    )
    duration_days: tuple[int, int] = (1, 3)
    albums: int = 0
    rows_per_album: tuple[int, int] = (0, 40)
    retail_categories: int = 0
    retailers: int = 40
    products_per_category: tuple[int, int] = (22, 30)
    quotes_per_product: tuple[int, int] = (9, 16)


@dataclass
class HarvestConfig:
    mode: str = "event"
    interval: int = 3600
    url: str | None = None
    rate: float = 5.0
    retries: int = 2
    backoff: float = 0.5
    workers: int = 4
    window: tuple[str, str] | None = None
    inject: dict[str, int] = field(default_factory=lambda: {"drop": 0, "error": 0, "garble": 0})


@dataclass
class CleanseConfig:
    frivolous_fraction: float = FRIVOLOUS_FRACTION


@dataclass
class QuotesConfig:
    min_quotes_per_product: int = MIN_QUOTES_PER_PRODUCT
    min_products_per_category: int = MIN_PRODUCTS_PER_CATEGORY


@dataclass
class AnalysisConfig:
    k_range: tuple[int, int] = (2, 6)
    k: int | None = None


@dataclass
class ReportConfig:
    plots: bool = False


@dataclass
class Config:
    seed: int = 0
    out: str = "workbench-out"
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    harvest: HarvestConfig = field(default_factory=HarvestConfig)
    cleanse: CleanseConfig = field(default_factory=CleanseConfig)
    quotes: QuotesConfig = field(default_factory=QuotesConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects outputs (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=list).encode()).hexdigest()[:16]

    def validate(self) -> Config:
        s, h = self.simulation, self.harvest
        for name in ("lot_range", "bidder_range", "duration_days", "rows_per_album", "products_per_category",
                     "quotes_per_product"):
            lo, hi = getattr(s, name)
            if not 0 <= lo <= hi:
                raise ConfigError(f"simulation.{name} must be an ordered non-negative pair, got {[lo, hi]}")
        if s.lot_range[0] < 1 or s.duration_days[0] < 1:
            raise ConfigError("simulation.lot_range and duration_days must start at >= 1")
        if s.auctions < 0 or s.albums < 0 or s.retail_categories < 0 or s.retailers < 1:
            raise ConfigError("simulation counts must be non-negative (retailers >= 1)")
        if s.lot_fraction is not None and not 0 < s.lot_fraction[0] <= s.lot_fraction[1]:
            raise ConfigError("simulation.lot_fraction must be an ordered positive pair")
        if abs(sum(s.mix.values()) - 1.0) > 1e-9:
            raise ConfigError(f"simulation.mix must sum to 1, got {sum(s.mix.values()):.6g}")
        if h.mode not in ("event", "interval"):
            raise ConfigError(f"harvest.mode must be 'event' or 'interval', got {h.mode!r}")
        if h.interval <= 0 or h.rate <= 0 or h.retries < 0 or h.backoff < 0 or h.workers < 1:
            raise ConfigError("harvest interval, rate and workers must be positive; retries and backoff >= 0")
        unknown = set(h.inject) - {"drop", "error", "garble"}
        if unknown or any(v < 0 for v in h.inject.values()):
            raise ConfigError(f"harvest.inject takes non-negative drop/error/garble counts, got {h.inject}")
        if not 0 < self.cleanse.frivolous_fraction <= 1:
            raise ConfigError("cleanse.frivolous_fraction must be in (0, 1]")
        if self.quotes.min_quotes_per_product < 1 or self.quotes.min_products_per_category < 1:
            raise ConfigError("quote thresholds must be >= 1")
        lo, hi = self.analysis.k_range
        if not 2 <= lo <= hi:
            raise ConfigError("analysis.k_range must satisfy 2 <= lo <= hi")
        if self.analysis.k is not None and self.analysis.k < 1:
            raise ConfigError("analysis.k must be >= 1")
        return self


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}" if where != "config" else name)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict | None) -> Config:
    try:
        return _build(Config, data or {}, "config").validate()
    except TypeError as exc:
        raise ConfigError(f"config value has the wrong type: {exc}") from None


def load_config(path: Path | str | None, **overrides: Any) -> Config:
    """Read a YAML config; non-None ``overrides`` replace top-level keys."""
    data: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping at the top level")
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return config_from_dict(data)
