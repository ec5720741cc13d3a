"""Majority-vote aggregation of per-model rankings into consensus
portfolios.

A ticker enters the consensus BUY portfolio for a quarter when at least
`threshold` member models rank it inside their top k; SELL mirrors the
rule over the bottom k. Consensus can be smaller than k, or empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import InvalidConfig, QuarterMismatch
from .evaluate import PortfolioReport, RankTable, quarter_return, report
from .quarters import Quarter


@dataclass(frozen=True)
class VoteConfig:
    members: tuple[str, ...]
    threshold: int
    k: int = 20
    side: str = "BUY"

    def __post_init__(self) -> None:
        if not 1 <= self.threshold <= len(self.members):
            raise InvalidConfig(
                f"threshold {self.threshold} not in 1..{len(self.members)} members"
            )
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.side not in ("BUY", "SELL"):
            raise InvalidConfig(f"side must be BUY or SELL, got {self.side!r}")


def aggregate(
    rank_tables: Mapping[str, RankTable], config: VoteConfig
) -> dict[Quarter, tuple[str, ...]]:
    """Per-quarter consensus tickers (sorted); may be empty for a quarter."""
    for name in config.members:
        if name not in rank_tables:
            raise InvalidConfig(f"no rank table for member {name!r}")
    tables = [rank_tables[name] for name in config.members]
    quarters = sorted(tables[0])
    for name, table in zip(config.members[1:], tables[1:]):
        if sorted(table) != quarters:
            raise QuarterMismatch(f"member {name!r} covers different quarters")
    consensus: dict[Quarter, tuple[str, ...]] = {}
    for q in quarters:
        universe = set(tables[0][q])
        votes: dict[str, int] = {}
        for table in tables:
            ranked = table[q]
            if set(ranked) != universe:
                raise QuarterMismatch(f"members rank different tickers in {q}")
            if config.k > len(ranked):
                raise InvalidConfig(f"k={config.k} exceeds universe size {len(ranked)}")
            chosen = ranked[: config.k] if config.side == "BUY" else ranked[-config.k :]
            for t in chosen:
                votes[t] = votes.get(t, 0) + 1
        consensus[q] = tuple(sorted(t for t, v in votes.items() if v >= config.threshold))
    return consensus


def consensus_report(
    consensus: Mapping[Quarter, tuple[str, ...]],
    actuals: Mapping[tuple[Quarter, str], float],
) -> tuple[PortfolioReport, list[Quarter]]:
    """Score the consensus series; empty quarters count as a flat 0 return
    and are returned for flagging."""
    quarterly = []
    empty: list[Quarter] = []
    for q in sorted(consensus):
        tickers = consensus[q]
        if not tickers:
            empty.append(q)
            quarterly.append((q, 0.0))
            continue
        quarterly.append((q, quarter_return(tickers, q, actuals)))
    return report(quarterly), empty
