"""Seeded synthetic universe with a planted fundamental signal.

Raw level series are generated so that their percent changes are exact
draws from known distributions, and next-quarter relative returns follow
a linear function of the chosen features' standardized values plus
noise. The manifest records the ground truth so end-to-end recovery can
be verified.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .ingest import RAW_FEATURES, STOCK_HEADER
from .preprocess import PAST_RETURN_FEATURE
from .quarters import Quarter, quarter_range

FEATURE_NAMES_21 = RAW_FEATURES + (PAST_RETURN_FEATURE,)

BENCHMARK_FILENAME = "benchmark.csv"
MANIFEST_FILENAME = "manifest.json"


@dataclass(frozen=True)
class SynthConfig:
    n_stocks: int = 70
    n_quarters: int = 88
    seed: int = 0
    signal_features: tuple[str, ...] = ("pb", PAST_RETURN_FEATURE, "book_value")
    signal_coefficients: tuple[float, ...] = (2.0, 1.5, 1.0)
    noise_std: float = 2.0
    benchmark_drift: float = 1.0  # pct per quarter
    benchmark_vol: float = 4.0
    level_drift: float = 1.0  # mean pct change of raw levels
    level_vol: float = 5.0
    missing_fraction: float = 0.0
    start: Quarter = field(default_factory=lambda: Quarter(1996, 1))

    def __post_init__(self) -> None:
        if self.n_quarters < 12:
            raise InvalidConfig("n_quarters must be >= 12")
        if self.n_stocks < 1:
            raise InvalidConfig("n_stocks must be >= 1")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be >= 0")
        if len(self.signal_features) != len(self.signal_coefficients):
            raise InvalidConfig("one coefficient per signal feature")
        for name in self.signal_features:
            if name not in FEATURE_NAMES_21:
                raise InvalidConfig(f"unknown signal feature {name!r}")
        if not 0 <= self.missing_fraction < 1:
            raise InvalidConfig("missing_fraction must be in [0, 1)")
        if self.level_vol <= 0 or self.benchmark_vol < 0:
            raise InvalidConfig("volatilities must be positive")

    @property
    def relative_return_std(self) -> float:
        """Stationary std of the planted relative-return process."""
        return math.sqrt(
            sum(c * c for c in self.signal_coefficients) + self.noise_std**2
        )


def _tickers(n: int) -> list[str]:
    return [f"S{i:03d}" for i in range(n)]


def generate(config: SynthConfig, out_dir: str | Path) -> dict:
    """Write per-ticker CSVs, the benchmark CSV and a ground-truth manifest.

    Returns the manifest dict. Byte-identical output for a given config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    n, nq = config.n_stocks, config.n_quarters
    quarters = quarter_range(config.start, nq)
    sigma_r = config.relative_return_std

    # benchmark first so its draws are independent of the stock count
    bench_ret = config.benchmark_drift + config.benchmark_vol * rng.standard_normal(nq - 1)
    bench_ret = np.clip(bench_ret, -90.0, None)
    levels = 1000.0 * np.cumprod(np.concatenate([[1.0], 1.0 + bench_ret / 100.0]))
    with (out / BENCHMARK_FILENAME).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("quarter_end", "level"))
        for q, lvl in zip(quarters, levels):
            writer.writerow((q.end_date().isoformat(), repr(float(lvl))))

    raw_signal = [
        (RAW_FEATURES.index(f), c)
        for f, c in zip(config.signal_features, config.signal_coefficients)
        if f != PAST_RETURN_FEATURE
    ]
    momentum_coef = dict(zip(config.signal_features, config.signal_coefficients)).get(
        PAST_RETURN_FEATURE, 0.0
    )

    tickers = _tickers(n)
    for ticker in tickers:
        # standard-normal shocks per raw feature; deltas[t] applies between
        # quarter t and t+1 (t = 0..nq-2)
        u = rng.standard_normal((nq - 1, len(RAW_FEATURES)))
        deltas = np.clip(config.level_drift + config.level_vol * u, -90.0, None)
        rel = np.empty(nq - 1)  # rel[t]: relative return over quarters[t + 1]
        rel[0] = sigma_r * rng.standard_normal()
        eps = config.noise_std * rng.standard_normal(nq - 2)
        for t in range(1, nq - 1):
            signal = sum(c * u[t - 1, j] for j, c in raw_signal)
            signal += momentum_coef * rel[t - 1] / sigma_r
            rel[t] = signal + eps[t - 1]
        stock_ret = np.clip(bench_ret + rel, -90.0, None)
        prices = rng.uniform(20.0, 200.0) * np.cumprod(
            np.concatenate([[1.0], 1.0 + stock_ret / 100.0])
        )
        level0 = rng.uniform(10.0, 1000.0, size=len(RAW_FEATURES))
        levels_mat = level0 * np.cumprod(
            np.vstack([np.ones(len(RAW_FEATURES)), 1.0 + deltas / 100.0]), axis=0
        )
        cells = [[repr(float(v)) for v in row] for row in levels_mat]
        if config.missing_fraction > 0:
            total = nq * len(RAW_FEATURES)
            hit = rng.choice(total, size=round(config.missing_fraction * total), replace=False)
            for flat in hit:
                cells[flat // len(RAW_FEATURES)][flat % len(RAW_FEATURES)] = ""
        with (out / f"{ticker}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(STOCK_HEADER)
            for i, q in enumerate(quarters):
                writer.writerow(
                    [q.end_date().isoformat(), repr(float(prices[i]))] + cells[i]
                )

    manifest = {
        "format": "fundrank/synth-manifest",
        "version": 1,
        "seed": config.seed,
        "n_stocks": n,
        "n_quarters": nq,
        "quarters": [str(quarters[0]), str(quarters[-1])],
        "tickers": tickers,
        "signal_features": list(config.signal_features),
        "signal_coefficients": list(config.signal_coefficients),
        "noise_std": config.noise_std,
        "relative_return_std": sigma_r,
        "benchmark_drift": config.benchmark_drift,
        "benchmark_vol": config.benchmark_vol,
        "level_drift": config.level_drift,
        "level_vol": config.level_vol,
        "missing_fraction": config.missing_fraction,
        "expected_top_features": sorted(config.signal_features),
    }
    (out / MANIFEST_FILENAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
