"""Ranking, portfolio construction and performance metrics.

All returns are quarterly relative returns in percentage points. The
Portfolio Score is mean/std of the quarterly series (a Sharpe variant
with the risk-free rate left out); compound return chains the quarterly
series multiplicatively.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    KTooLarge,
    MissingActual,
    TooFewQuarters,
    UnknownQuarter,
    ZeroStd,
)
from .quarters import Quarter

# quarter -> tickers ordered best to worst
RankTable = dict[Quarter, tuple[str, ...]]


@dataclass(frozen=True)
class PredictionTable:
    """(quarter, ticker) -> predicted relative return, pct points."""

    values: Mapping[tuple[Quarter, str], float]

    def quarters(self) -> tuple[Quarter, ...]:
        return tuple(sorted({q for q, _ in self.values}))

    def tickers(self, quarter: Quarter) -> tuple[str, ...]:
        return tuple(sorted(t for q, t in self.values if q == quarter))

    def to_rows(self) -> list[tuple[str, str, float]]:
        return [
            (str(q), t, v)
            for (q, t), v in sorted(self.values.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        ]


@dataclass(frozen=True)
class Portfolio:
    quarter: Quarter
    side: str  # BUY | SELL
    tickers: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.side not in ("BUY", "SELL"):
            raise ValueError(f"side must be BUY or SELL, got {self.side!r}")
        if not self.tickers:
            raise ValueError("portfolio cannot be empty")
        if len(set(self.tickers)) != len(self.tickers):
            raise ValueError("portfolio tickers must be distinct")


@dataclass(frozen=True)
class PortfolioReport:
    """Summary of a quarterly relative-return series."""

    mean: float
    std: float
    score: float
    compound: float
    quarterly: tuple[tuple[Quarter, float], ...]

    def row(self) -> dict[str, float]:
        return {
            "Mean": self.mean,
            "STD": self.std,
            "PortfolioScore": self.score,
            "Compound": self.compound,
        }


def rank(predictions: PredictionTable, quarter: Quarter) -> tuple[str, ...]:
    """Tickers ordered by descending prediction; ties go alphabetically."""
    entries = [(t, v) for (q, t), v in predictions.values.items() if q == quarter]
    if not entries:
        raise UnknownQuarter(f"no predictions for {quarter}")
    entries.sort(key=lambda tv: (-tv[1], tv[0]))
    return tuple(t for t, _ in entries)


def rank_table(predictions: PredictionTable) -> RankTable:
    return {q: rank(predictions, q) for q in predictions.quarters()}


def top_bottom(
    ranked: Sequence[str], quarter: Quarter, k: int
) -> tuple[Portfolio, Portfolio]:
    """First k of the ranking as the BUY side, last k as the SELL side."""
    if k < 1:
        raise KTooLarge("k must be >= 1")
    if k > len(ranked):
        raise KTooLarge(f"k={k} exceeds universe size {len(ranked)}")
    buy = Portfolio(quarter=quarter, side="BUY", tickers=tuple(ranked[:k]))
    sell = Portfolio(quarter=quarter, side="SELL", tickers=tuple(ranked[-k:]))
    return buy, sell


def quarter_return(
    tickers: Iterable[str],
    quarter: Quarter,
    actuals: Mapping[tuple[Quarter, str], float],
) -> float:
    """Equal-weight mean of the constituents' realized relative returns."""
    total = 0.0
    count = 0
    for t in tickers:
        key = (quarter, t)
        if key not in actuals:
            raise MissingActual(f"no realized return for {t} in {quarter}")
        total += actuals[key]
        count += 1
    if count == 0:
        raise MissingActual(f"empty portfolio for {quarter}")
    return total / count


def report(quarterly: Sequence[tuple[Quarter, float]]) -> PortfolioReport:
    """Mean, sample std, Score = mean/std, and compounded relative return."""
    if len(quarterly) < 2:
        raise TooFewQuarters(f"need at least 2 quarters, got {len(quarterly)}")
    ordered = tuple(sorted(quarterly, key=lambda qv: qv[0]))
    values = np.array([v for _, v in ordered], dtype=float)
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    if np.ptp(values) == 0 or std == 0:
        raise ZeroStd("all quarterly returns identical")
    compound = (float(np.prod(1.0 + values / 100.0)) - 1.0) * 100.0
    return PortfolioReport(
        mean=mean, std=std, score=mean / std, compound=compound, quarterly=ordered
    )


def sharpe(returns: Sequence[float], risk_free_rate: float = 0.0) -> float:
    """(mean - R_f) / std; at R_f = 0 this equals the Portfolio Score."""
    values = np.asarray(returns, dtype=float)
    if len(values) < 2:
        raise TooFewQuarters(f"need at least 2 returns, got {len(values)}")
    std = float(values.std(ddof=1))
    if np.ptp(values) == 0 or std == 0:
        raise ZeroStd("all returns identical")
    return (float(values.mean()) - risk_free_rate) / std


def universe_report(actuals: Mapping[tuple[Quarter, str], float]) -> PortfolioReport:
    """Every ticker held equal-weight each quarter."""
    by_quarter: dict[Quarter, list[float]] = {}
    for (q, _), v in actuals.items():
        by_quarter.setdefault(q, []).append(v)
    quarterly = [(q, float(np.mean(vals))) for q, vals in sorted(by_quarter.items())]
    return report(quarterly)


def backtest(
    predictions: PredictionTable,
    actuals: Mapping[tuple[Quarter, str], float],
    k: int,
    side: str,
) -> tuple[PortfolioReport, list[Portfolio]]:
    """Hold the k best (BUY) or k worst (SELL) ranked tickers each quarter."""
    side = side.upper()
    portfolios: list[Portfolio] = []
    quarterly: list[tuple[Quarter, float]] = []
    for q in predictions.quarters():
        ranked = rank(predictions, q)
        buy, sell = top_bottom(ranked, q, k)
        portfolio = buy if side == "BUY" else sell
        portfolios.append(portfolio)
        quarterly.append((q, quarter_return(portfolio.tickers, q, actuals)))
    return report(quarterly), portfolios


def actuals_table(sample_set, partition: str | None = None) -> dict[tuple[Quarter, str], float]:
    """Realized relative returns keyed by (target quarter, ticker)."""
    samples = (
        sample_set.samples if partition is None else sample_set.partition(partition)
    )
    return {(s.target_quarter, s.ticker): s.target for s in samples}


# --- emission ---------------------------------------------------------------

REPORT_COLUMNS = ("Mean", "STD", "PortfolioScore", "Compound")


def write_report_csv(
    path: str | Path,
    rows: Sequence[tuple[str, PortfolioReport]],
    *,
    meta: str | None = None,
) -> None:
    with Path(path).open("w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(("Strategy",) + REPORT_COLUMNS)
        for name, rep in rows:
            row = rep.row()
            writer.writerow([name] + [repr(row[c]) for c in REPORT_COLUMNS])


def write_series_csv(
    path: str | Path,
    quarterly: Sequence[tuple[Quarter, float]],
    *,
    meta: str | None = None,
) -> None:
    with Path(path).open("w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(("quarter", "relative_return"))
        for q, v in quarterly:
            writer.writerow((str(q), repr(v)))


def report_to_dict(rep: PortfolioReport) -> dict:
    return {
        "mean": rep.mean,
        "std": rep.std,
        "portfolio_score": rep.score,
        "compound": rep.compound,
        "quarterly": [[str(q), v] for q, v in rep.quarterly],
    }


def write_predictions_csv(
    path: str | Path, predictions: PredictionTable, *, meta: str | None = None
) -> None:
    with Path(path).open("w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        writer = csv.writer(fh)
        writer.writerow(("quarter", "ticker", "prediction"))
        for q, t, v in predictions.to_rows():
            writer.writerow((q, t, repr(v)))


def read_predictions_csv(path: str | Path) -> PredictionTable:
    values: dict[tuple[Quarter, str], float] = {}
    with Path(path).open(newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    if tuple(header) != ("quarter", "ticker", "prediction"):
        raise ValueError(f"{path}: unexpected header {header!r}")
    for row in reader:
        if not row:
            continue
        q, t, v = row
        values[(Quarter.parse(q), t)] = float(v)
    return PredictionTable(values=values)
