"""Shared fixtures: hand-built series and small synthetic universes."""

from __future__ import annotations

import numpy as np
import pytest

from fundrank.ingest import RAW_FEATURES, BenchmarkSeries, StockSeries
from fundrank.quarters import Quarter, quarter_range


def make_series(
    ticker: str,
    n_quarters: int,
    *,
    start: Quarter = Quarter(2000, 1),
    seed: int = 0,
    prices: np.ndarray | None = None,
) -> StockSeries:
    """A gap-free series with positive random-walk levels."""
    rng = np.random.default_rng(seed)
    quarters = tuple(quarter_range(start, n_quarters))
    steps = 1.0 + rng.uniform(-0.05, 0.07, size=(n_quarters, len(RAW_FEATURES)))
    values = 100.0 * np.cumprod(steps, axis=0)
    if prices is None:
        prices = 50.0 * np.cumprod(1.0 + rng.uniform(-0.04, 0.06, size=n_quarters))
    return StockSeries(
        ticker=ticker, quarters=quarters, values=values, prices=np.asarray(prices, dtype=float)
    )


def make_benchmark(
    n_quarters: int, *, start: Quarter = Quarter(2000, 1), seed: int = 99
) -> BenchmarkSeries:
    rng = np.random.default_rng(seed)
    quarters = tuple(quarter_range(start, n_quarters))
    levels = 1000.0 * np.cumprod(1.0 + rng.uniform(-0.03, 0.05, size=n_quarters))
    return BenchmarkSeries(quarters=quarters, levels=levels)


@pytest.fixture
def small_universe():
    series = [make_series(f"T{i:02d}", 40, seed=i) for i in range(5)]
    benchmark = make_benchmark(40)
    return series, benchmark


@pytest.fixture(scope="session")
def synth_data(tmp_path_factory):
    """A small generated universe on disk, shared across CLI tests."""
    from fundrank.synthetic import SynthConfig, generate

    out = tmp_path_factory.mktemp("synth_data")
    config = SynthConfig(n_stocks=10, n_quarters=44, seed=11, noise_std=2.0)
    manifest = generate(config, out)
    return out, manifest
