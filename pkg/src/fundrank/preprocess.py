"""Feature construction, chronological splitting and leak-free scaling.

Raw levels become percent-change features; the prediction target is the
next quarter's relative return versus the benchmark, in percentage
points. Samples are labelled train/validation/test by the quarter they
predict, and scaling statistics are fitted on the train partition only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyPartition,
    InsufficientHistory,
    QuarterOutOfRange,
    ZeroBase,
    ZeroVariance,
)
from .ingest import BenchmarkSeries, StockSeries
from .quarters import Quarter

logger = logging.getLogger(__name__)

PARTITIONS = ("train", "validation", "test")

# Feature 20: the stock's own relative return over the feature quarter.
PAST_RETURN_FEATURE = "relative_return"


def pct_change(series: StockSeries, *, zero_base: str = "zero") -> np.ndarray:
    """Quarter-over-quarter percent change of every raw level.

    Returns shape (n_quarters - 1, n_features), aligned to quarters[1:].
    A zero base value yields 0 with a warning, or raises when
    zero_base="error".
    """
    if zero_base not in ("zero", "error"):
        raise ValueError(f"zero_base must be 'zero' or 'error', got {zero_base!r}")
    if series.has_missing():
        raise DataError(f"{series.ticker}: impute before detrending")
    if series.n_quarters < 2:
        raise InsufficientHistory(f"{series.ticker}: need at least 2 quarters")
    base = series.values[:-1]
    cur = series.values[1:]
    zero = base == 0.0
    if zero.any():
        if zero_base == "error":
            i, j = np.argwhere(zero)[0]
            raise ZeroBase(
                f"{series.ticker}/{series.feature_names[j]} at {series.quarters[int(i) + 1]}: "
                "zero base value"
            )
        for i, j in np.argwhere(zero):
            logger.warning(
                "%s/%s at %s: zero base, percent change set to 0",
                series.ticker,
                series.feature_names[int(j)],
                series.quarters[int(i) + 1],
            )
    out = np.where(zero, 0.0, (cur - base) / np.where(zero, 1.0, base) * 100.0)
    return out


def compute_relative_return(
    series: StockSeries, benchmark: BenchmarkSeries, quarter: Quarter
) -> float:
    """Stock return minus benchmark return over `quarter`, in pct points.

    Both returns run from the previous quarter's end to this quarter's
    end, so the price and the index level must exist at both quarters.
    """
    prev = quarter.prev()
    try:
        i_end = series.quarters.index(quarter)
        i_start = series.quarters.index(prev)
    except ValueError:
        raise QuarterOutOfRange(f"{series.ticker}: no prices spanning {quarter}") from None
    b_end = benchmark.level_at(quarter)
    b_start = benchmark.level_at(prev)
    if b_end is None or b_start is None:
        raise QuarterOutOfRange(f"benchmark has no levels spanning {quarter}")
    p_start, p_end = series.prices[i_start], series.prices[i_end]
    if np.isnan(p_start) or np.isnan(p_end):
        raise DataError(f"{series.ticker}: missing price at {prev} or {quarter}")
    stock_ret = (p_end / p_start - 1.0) * 100.0
    bench_ret = (b_end / b_start - 1.0) * 100.0
    return float(stock_ret - bench_ret)


@dataclass(frozen=True)
class Sample:
    """Features observed at `feature_quarter`, predicting the relative
    return over `target_quarter` (always the following quarter)."""

    ticker: str
    feature_quarter: Quarter
    target_quarter: Quarter
    features: np.ndarray
    target: float

    def __post_init__(self) -> None:
        if self.target_quarter != self.feature_quarter.next():
            raise DataError(
                f"{self.ticker}: target quarter {self.target_quarter} does not follow "
                f"{self.feature_quarter}"
            )
        self.features.setflags(write=False)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature mean and (population) standard deviation, train-fitted."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean.setflags(write=False)
        self.std.setflags(write=False)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass(frozen=True)
class SampleSet:
    """All samples of a universe plus split boundaries and scaling params.

    Stored features are raw; `matrix()` applies the standardization when
    params are present. Partition membership is decided by the target
    quarter: train <= b1 < validation <= b2 < test.
    """

    feature_names: tuple[str, ...]
    samples: tuple[Sample, ...]
    boundaries: tuple[Quarter, Quarter] | None = None
    params: StandardizationParams | None = None

    def __post_init__(self) -> None:
        p = len(self.feature_names)
        for s in self.samples:
            if s.features.shape != (p,):
                raise DataError(
                    f"{s.ticker} {s.feature_quarter}: feature vector length "
                    f"{s.features.shape} != {p}"
                )

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(sorted({s.ticker for s in self.samples}))

    def partition_of(self, sample: Sample) -> str:
        if self.boundaries is None:
            raise DataError("sample set has no split boundaries")
        b1, b2 = self.boundaries
        q = sample.target_quarter
        if q <= b1:
            return "train"
        if q <= b2:
            return "validation"
        return "test"

    def partition(self, name: str) -> tuple[Sample, ...]:
        if name not in PARTITIONS:
            raise ValueError(f"unknown partition {name!r}")
        return tuple(s for s in self.samples if self.partition_of(s) == name)

    def quarters(self, partition: str | None = None) -> tuple[Quarter, ...]:
        """Distinct target quarters, sorted; optionally one partition's."""
        samples = self.samples if partition is None else self.partition(partition)
        return tuple(sorted({s.target_quarter for s in samples}))

    def raw_matrix(
        self, partition: str | None = None, ticker: str | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        samples = self.samples if partition is None else self.partition(partition)
        if ticker is not None:
            samples = tuple(s for s in samples if s.ticker == ticker)
        if not samples:
            p = len(self.feature_names)
            return np.empty((0, p)), np.empty(0)
        X = np.stack([s.features for s in samples])
        y = np.array([s.target for s in samples])
        return X, y

    def matrix(
        self, partition: str | None = None, ticker: str | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) with X standardized when params are fitted; y is never scaled."""
        X, y = self.raw_matrix(partition, ticker)
        if self.params is not None and len(X):
            X = self.params.transform(X)
        return X, y


def assemble_samples(
    universe: Iterable[StockSeries],
    benchmark: BenchmarkSeries,
    *,
    zero_base: str = "zero",
) -> SampleSet:
    """Align percent-change features with next-quarter relative returns.

    A ticker with quarters q_0..q_{n-1} yields samples at q_1..q_{n-2}:
    the first quarter has no percent change, the last no target.
    """
    samples: list[Sample] = []
    feature_names: tuple[str, ...] | None = None
    for series in sorted(universe, key=lambda s: s.ticker):
        if series.n_quarters < 3:
            raise InsufficientHistory(
                f"{series.ticker}: {series.n_quarters} quarters, need at least 3"
            )
        if feature_names is None:
            feature_names = series.feature_names + (PAST_RETURN_FEATURE,)
        elif series.feature_names + (PAST_RETURN_FEATURE,) != feature_names:
            raise DataError(f"{series.ticker}: inconsistent feature names")
        deltas = pct_change(series, zero_base=zero_base)
        rel = {
            q: compute_relative_return(series, benchmark, q)
            for q in series.quarters[1:]
        }
        for t in range(1, series.n_quarters - 1):
            q = series.quarters[t]
            q_next = series.quarters[t + 1]
            features = np.concatenate([deltas[t - 1], [rel[q]]])
            samples.append(
                Sample(
                    ticker=series.ticker,
                    feature_quarter=q,
                    target_quarter=q_next,
                    features=features,
                    target=rel[q_next],
                )
            )
    if feature_names is None:
        raise DataError("empty universe")
    samples.sort(key=lambda s: (s.ticker, s.target_quarter))
    return SampleSet(feature_names=feature_names, samples=tuple(samples))


def default_boundaries(sample_set: SampleSet) -> tuple[Quarter, Quarter]:
    """Boundaries giving ~60/20/20 of the distinct target quarters."""
    qs = sample_set.quarters()
    n = len(qs)
    if n < 3:
        raise EmptyPartition(f"only {n} distinct quarters, cannot split three ways")
    n_train = max(1, round(0.6 * n))
    n_val = max(1, round(0.2 * n))
    if n_train + n_val >= n:
        n_val = max(1, n - n_train - 1)
    return qs[n_train - 1], qs[n_train + n_val - 1]


def split_chronological(
    sample_set: SampleSet, b1: Quarter, b2: Quarter
) -> SampleSet:
    """Label partitions by target quarter: train <= b1 < validation <= b2 < test.

    Any previously fitted scaling params are discarded (they would refer
    to a different train partition).
    """
    if not b1 < b2:
        raise DataError(f"boundaries out of order: {b1} >= {b2}")
    out = replace(sample_set, boundaries=(b1, b2), params=None)
    for name in PARTITIONS:
        if not out.partition(name):
            raise EmptyPartition(f"{name} partition is empty with boundaries {b1}, {b2}")
    return out


def standardize(sample_set: SampleSet) -> tuple[SampleSet, StandardizationParams]:
    """Fit per-feature mean/std on train and apply to every partition.

    Targets stay in percentage points. A feature that is constant on the
    train partition cannot be scaled.
    """
    X_train, _ = sample_set.raw_matrix("train")
    if not len(X_train):
        raise EmptyPartition("train partition is empty")
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    flat = (np.ptp(X_train, axis=0) == 0) | (std == 0)
    if flat.any():
        j = int(np.argmax(flat))
        raise ZeroVariance(
            f"feature {sample_set.feature_names[j]!r} is constant on the train partition"
        )
    params = StandardizationParams(mean=mean, std=std)
    return replace(sample_set, params=params), params


def merge_train_validation(sample_set: SampleSet) -> SampleSet:
    """Fold validation into train and refit scaling on the merged train."""
    if sample_set.boundaries is None:
        raise DataError("sample set has no split boundaries")
    b1, b2 = sample_set.boundaries
    last = sample_set.quarters()[-1]
    if b2 >= last:
        raise EmptyPartition(f"test partition is empty with boundaries {b1}, {b2}")
    merged = replace(sample_set, boundaries=(b2, b2), params=None)
    merged, _ = standardize(merged)
    return merged


# --- serialization ----------------------------------------------------------

FORMAT = "fundrank/samples"
VERSION = 1


def to_dict(sample_set: SampleSet) -> dict:
    doc: dict = {
        "format": FORMAT,
        "version": VERSION,
        "feature_names": list(sample_set.feature_names),
        "boundaries": (
            [str(q) for q in sample_set.boundaries] if sample_set.boundaries else None
        ),
        "params": (
            {
                "mean": sample_set.params.mean.tolist(),
                "std": sample_set.params.std.tolist(),
            }
            if sample_set.params
            else None
        ),
        "samples": [
            {
                "ticker": s.ticker,
                "feature_quarter": str(s.feature_quarter),
                "features": s.features.tolist(),
                "target": s.target,
            }
            for s in sample_set.samples
        ],
    }
    return doc


def from_dict(doc: dict) -> SampleSet:
    if doc.get("format") != FORMAT:
        raise DataError(f"not a sample-set artifact: format={doc.get('format')!r}")
    params = None
    if doc.get("params"):
        params = StandardizationParams(
            mean=np.array(doc["params"]["mean"], dtype=float),
            std=np.array(doc["params"]["std"], dtype=float),
        )
    boundaries = None
    if doc.get("boundaries"):
        b1, b2 = doc["boundaries"]
        boundaries = (Quarter.parse(b1), Quarter.parse(b2))
    samples = []
    for s in doc["samples"]:
        fq = Quarter.parse(s["feature_quarter"])
        samples.append(
            Sample(
                ticker=s["ticker"],
                feature_quarter=fq,
                target_quarter=fq.next(),
                features=np.array(s["features"], dtype=float),
                target=float(s["target"]),
            )
        )
    return SampleSet(
        feature_names=tuple(doc["feature_names"]),
        samples=tuple(samples),
        boundaries=boundaries,
        params=params,
    )


def save(sample_set: SampleSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_dict(sample_set)))


def load(path: str | Path) -> SampleSet:
    return from_dict(json.loads(Path(path).read_text()))
