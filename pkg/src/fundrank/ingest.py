"""Parsing and repair of quarterly fundamental files.

Per-ticker CSVs carry raw levels (total assets, revenue, ...) plus the
end-of-quarter share price; the benchmark CSV carries the index closing
level. Missing cells are repaired here so that downstream transforms can
assume complete series.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AllFeaturesDropped,
    DataError,
    DuplicateQuarter,
    EmptyFile,
    GapTooLong,
    MalformedHeader,
)
from .quarters import Quarter

logger = logging.getLogger(__name__)

# Raw level columns, in file order. Percent changes of these become
# features 0..19; feature 20 (past-quarter relative return) is derived
# from prices later.
RAW_FEATURES: tuple[str, ...] = (
    "pe",
    "assets",
    "current_assets",
    "liabilities",
    "current_liabilities",
    "book_value",
    "revenue",
    "earnings",
    "cash_from_op",
    "cash_from_inv",
    "cash_from_fin",
    "cash",
    "capital_exp",
    "pb",
    "cash_per_share",
    "current_ratio",
    "net_margin",
    "roa",
    "asset_turnover",
    "eps",
)

STOCK_HEADER: tuple[str, ...] = ("quarter_end", "price") + RAW_FEATURES
BENCHMARK_HEADER: tuple[str, ...] = ("quarter_end", "level")

MISSING_TOKENS = frozenset({"", "n/a", "na", "nan", "null", "none"})

# Warn-only threshold: sparse leftovers after feature dropping are expected
# to stay under this fraction per column.
SPARSE_WARN_FRACTION = 0.03


@dataclass(frozen=True)
class RawRecord:
    """One quarter's raw levels for one ticker. None marks a missing cell."""

    quarter: Quarter
    values: dict[str, float | None]
    price: float | None


@dataclass(frozen=True)
class StockSeries:
    """Chronologically ordered quarterly records for one ticker.

    `values` is (n_quarters, n_features) with NaN for missing cells;
    `prices` is (n_quarters,). Arrays are frozen after construction.
    """

    ticker: str
    quarters: tuple[Quarter, ...]
    values: np.ndarray
    prices: np.ndarray
    feature_names: tuple[str, ...] = RAW_FEATURES

    def __post_init__(self) -> None:
        n = len(self.quarters)
        if self.values.shape != (n, len(self.feature_names)):
            raise ValueError(
                f"{self.ticker}: values shape {self.values.shape} does not match "
                f"{n} quarters x {len(self.feature_names)} features"
            )
        if self.prices.shape != (n,):
            raise ValueError(f"{self.ticker}: prices shape {self.prices.shape}")
        for prev, cur in zip(self.quarters, self.quarters[1:]):
            if not prev < cur:
                raise DuplicateQuarter(
                    f"{self.ticker}: quarters not strictly increasing at {cur}"
                )
        self.values.setflags(write=False)
        self.prices.setflags(write=False)

    @classmethod
    def from_records(cls, ticker: str, records: Sequence[RawRecord]) -> "StockSeries":
        records = sorted(records, key=lambda r: r.quarter)
        quarters = tuple(r.quarter for r in records)
        values = np.full((len(records), len(RAW_FEATURES)), np.nan)
        prices = np.full(len(records), np.nan)
        for i, rec in enumerate(records):
            for j, name in enumerate(RAW_FEATURES):
                v = rec.values.get(name)
                if v is not None:
                    values[i, j] = v
            if rec.price is not None:
                prices[i] = rec.price
        return cls(ticker=ticker, quarters=quarters, values=values, prices=prices)

    @property
    def n_quarters(self) -> int:
        return len(self.quarters)

    @property
    def records(self) -> list[RawRecord]:
        out = []
        for i, q in enumerate(self.quarters):
            vals = {
                name: (None if math.isnan(self.values[i, j]) else float(self.values[i, j]))
                for j, name in enumerate(self.feature_names)
            }
            price = None if math.isnan(self.prices[i]) else float(self.prices[i])
            out.append(RawRecord(quarter=q, values=vals, price=price))
        return out

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any() or np.isnan(self.prices).any())


@dataclass(frozen=True)
class BenchmarkSeries:
    """Benchmark index closing level per quarter."""

    quarters: tuple[Quarter, ...]
    levels: np.ndarray

    def __post_init__(self) -> None:
        if self.levels.shape != (len(self.quarters),):
            raise ValueError("levels shape does not match quarters")
        for prev, cur in zip(self.quarters, self.quarters[1:]):
            if not prev < cur:
                raise DuplicateQuarter(f"benchmark quarters not strictly increasing at {cur}")
        if np.any(~np.isfinite(self.levels)) or np.any(self.levels <= 0):
            raise DataError("benchmark levels must be finite and > 0")
        self.levels.setflags(write=False)

    def level_at(self, quarter: Quarter) -> float | None:
        try:
            return float(self.levels[self.quarters.index(quarter)])
        except ValueError:
            return None


def _parse_cell(text: str) -> float:
    """Numeric cell parse; anything unparseable maps to NaN (missing)."""
    token = text.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        return math.nan


def parse_stock_file(path: str | Path) -> StockSeries:
    """Parse one per-ticker CSV into a sorted StockSeries.

    The ticker is the file stem, upper-cased. Unparseable numeric cells
    become missing; a repeated quarter is an error.
    """
    path = Path(path)
    ticker = path.stem.upper()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        if tuple(h.strip() for h in header) != STOCK_HEADER:
            raise MalformedHeader(
                f"{path}: header {header!r} does not match the documented schema"
            )
        seen: set[Quarter] = set()
        records: list[RawRecord] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(STOCK_HEADER):
                raise MalformedHeader(
                    f"{path}:{lineno}: expected {len(STOCK_HEADER)} cells, got {len(row)}"
                )
            try:
                quarter = Quarter.from_date(dt.date.fromisoformat(row[0].strip()))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad quarter_end date {row[0]!r}") from exc
            if quarter in seen:
                raise DuplicateQuarter(f"{path}: two rows for {quarter}")
            seen.add(quarter)
            price = _parse_cell(row[1])
            if not math.isnan(price) and price <= 0:
                logger.warning("%s %s: non-positive price %r treated as missing", ticker, quarter, row[1])
                price = math.nan
            values = {
                name: (None if math.isnan(v) else v)
                for name, v in zip(RAW_FEATURES, (_parse_cell(c) for c in row[2:]))
            }
            records.append(
                RawRecord(
                    quarter=quarter,
                    values=values,
                    price=None if math.isnan(price) else price,
                )
            )
    if not records:
        raise EmptyFile(f"{path}: no data rows")
    return StockSeries.from_records(ticker, records)


def parse_benchmark_file(path: str | Path) -> BenchmarkSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        if tuple(h.strip() for h in header) != BENCHMARK_HEADER:
            raise MalformedHeader(f"{path}: header {header!r} != {BENCHMARK_HEADER}")
        rows: list[tuple[Quarter, float]] = []
        seen: set[Quarter] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                quarter = Quarter.from_date(dt.date.fromisoformat(row[0].strip()))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad quarter_end date {row[0]!r}") from exc
            if quarter in seen:
                raise DuplicateQuarter(f"{path}: two rows for {quarter}")
            seen.add(quarter)
            level = _parse_cell(row[1])
            if math.isnan(level):
                raise DataError(f"{path}:{lineno}: benchmark level missing or unparseable")
            rows.append((quarter, level))
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    rows.sort(key=lambda ql: ql[0])
    return BenchmarkSeries(
        quarters=tuple(q for q, _ in rows),
        levels=np.array([l for _, l in rows], dtype=float),
    )


def _longest_nan_run(col: np.ndarray) -> int:
    longest = run = 0
    for is_nan in np.isnan(col):
        run = run + 1 if is_nan else 0
        longest = max(longest, run)
    return longest


def drop_sparse_features(
    universe: Iterable[StockSeries],
    *,
    max_missing_fraction: float = 0.5,
    max_missing_block: int = 8,
) -> tuple[list[StockSeries], list[str]]:
    """Remove features that are too sparse to repair.

    A feature is dropped when its missing fraction across every record of
    every series exceeds `max_missing_fraction`, or when any single series
    has a contiguous missing block longer than `max_missing_block`
    quarters. The same columns are removed from every series.
    """
    universe = list(universe)
    if not universe:
        raise DataError("empty universe")
    names = universe[0].feature_names
    for s in universe:
        if s.feature_names != names:
            raise DataError(f"{s.ticker}: inconsistent feature names")

    total = sum(s.n_quarters for s in universe)
    missing = np.zeros(len(names))
    block_hit = np.zeros(len(names), dtype=bool)
    for s in universe:
        missing += np.isnan(s.values).sum(axis=0)
        for j in range(len(names)):
            if not block_hit[j] and _longest_nan_run(s.values[:, j]) > max_missing_block:
                block_hit[j] = True

    keep = [
        j
        for j in range(len(names))
        if missing[j] / total <= max_missing_fraction and not block_hit[j]
    ]
    dropped = [names[j] for j in range(len(names)) if j not in keep]
    if not keep:
        raise AllFeaturesDropped("every feature exceeded the sparsity limits")
    if not dropped:
        return universe, []

    kept_names = tuple(names[j] for j in keep)
    trimmed = [
        StockSeries(
            ticker=s.ticker,
            quarters=s.quarters,
            values=s.values[:, keep].copy(),
            prices=s.prices.copy(),
            feature_names=kept_names,
        )
        for s in universe
    ]
    logger.info("dropped %d sparse feature(s): %s", len(dropped), ", ".join(dropped))
    return trimmed, dropped


def _fill_column(col: np.ndarray, label: str) -> np.ndarray:
    """Repair one column in place (on a copy held by the caller).

    Interior gaps of length 1 take the neighbour mean, length 2 linear
    interpolation between the flanking values; longer interior gaps are an
    error. Leading/trailing gaps copy the nearest observed value.
    """
    nan = np.isnan(col)
    if not nan.any():
        return col
    if nan.all():
        raise GapTooLong(f"{label}: no observed values to repair from")
    obs = np.flatnonzero(~nan)
    first, last = obs[0], obs[-1]
    col[:first] = col[first]
    col[last + 1 :] = col[last]
    # interior runs between consecutive observed indices
    for left, right in zip(obs, obs[1:]):
        gap = right - left - 1
        if gap == 0:
            continue
        if gap > 2:
            raise GapTooLong(f"{label}: interior gap of {gap} quarters")
        step = (col[right] - col[left]) / (gap + 1)
        for k in range(1, gap + 1):
            col[left + k] = col[left] + step * k
    return col


def series_to_dict(series: StockSeries) -> dict:
    return {
        "ticker": series.ticker,
        "quarters": [str(q) for q in series.quarters],
        "feature_names": list(series.feature_names),
        "values": [[None if math.isnan(v) else v for v in row] for row in series.values],
        "prices": [None if math.isnan(p) else p for p in series.prices],
    }


def series_from_dict(doc: dict) -> StockSeries:
    values = np.array(
        [[math.nan if v is None else v for v in row] for row in doc["values"]], dtype=float
    )
    prices = np.array([math.nan if p is None else p for p in doc["prices"]], dtype=float)
    return StockSeries(
        ticker=doc["ticker"],
        quarters=tuple(Quarter.parse(q) for q in doc["quarters"]),
        values=values,
        prices=prices,
        feature_names=tuple(doc["feature_names"]),
    )


def save_universe(
    path: str | Path,
    universe: Sequence[StockSeries],
    benchmark: BenchmarkSeries,
    dropped: Sequence[str] = (),
) -> None:
    doc = {
        "format": "fundrank/universe",
        "version": 1,
        "dropped_features": list(dropped),
        "benchmark": {
            "quarters": [str(q) for q in benchmark.quarters],
            "levels": benchmark.levels.tolist(),
        },
        "series": [series_to_dict(s) for s in sorted(universe, key=lambda s: s.ticker)],
    }
    Path(path).write_text(json.dumps(doc))


def load_universe(path: str | Path) -> tuple[list[StockSeries], BenchmarkSeries, list[str]]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "fundrank/universe":
        raise DataError(f"not a universe artifact: format={doc.get('format')!r}")
    benchmark = BenchmarkSeries(
        quarters=tuple(Quarter.parse(q) for q in doc["benchmark"]["quarters"]),
        levels=np.array(doc["benchmark"]["levels"], dtype=float),
    )
    series = [series_from_dict(d) for d in doc["series"]]
    return series, benchmark, list(doc["dropped_features"])


def impute_missing(series: StockSeries) -> StockSeries:
    """Fill every missing cell of a series; returns a new series.

    Only cells that were missing change; applying the repair twice is a
    no-op.
    """
    if not series.has_missing():
        return series
    values = series.values.copy()
    prices = series.prices.copy()
    for j, name in enumerate(series.feature_names):
        frac = np.isnan(values[:, j]).mean()
        if frac > SPARSE_WARN_FRACTION:
            logger.warning(
                "%s/%s: %.1f%% missing exceeds the %.0f%% repair budget",
                series.ticker,
                name,
                100 * frac,
                100 * SPARSE_WARN_FRACTION,
            )
        _fill_column(values[:, j], f"{series.ticker}/{name}")
    _fill_column(prices, f"{series.ticker}/price")
    return StockSeries(
        ticker=series.ticker,
        quarters=series.quarters,
        values=values,
        prices=prices,
        feature_names=series.feature_names,
    )
