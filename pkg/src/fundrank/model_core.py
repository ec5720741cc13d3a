"""Shared regression-model surface: loss, per-stock training, prediction.

Every family exposes the same contract: fit on one ticker's train rows,
then predict deterministically. Per-ticker RNG seeds are derived from a
stable hash of (global seed, ticker), so results cannot depend on
ticker iteration order or on how training jobs are scheduled.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import DataError, Empty, LengthMismatch, MissingModel, TooFewSamples

if TYPE_CHECKING:
    from .preprocess import SampleSet

MODEL_FAMILIES = ("fnn", "rf", "anfis")

THREADS_ENV = "FUNDRANK_THREADS"


@dataclass(frozen=True)
class TrainReport:
    final_train_rmse: float
    loss_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.final_train_rmse < 0:
            raise ValueError("RMSE cannot be negative")


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Root mean squared error between two equal-length vectors."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if len(p) != len(t):
        raise LengthMismatch(f"{len(p)} predictions vs {len(t)} targets")
    if len(p) == 0:
        raise Empty("no values to score")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def derive_seed(seed: int, key: str) -> int:
    """Stable 64-bit sub-seed for (seed, key); independent of call order."""
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class TrainedModel:
    """A fitted model with its audit trail."""

    family: str
    ticker: str
    seed: int
    model: object
    report: TrainReport

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict(X)

    def to_dict(self) -> dict:
        return {
            "format": "fundrank/model",
            "version": 1,
            "family": self.family,
            "ticker": self.ticker,
            "seed": self.seed,
            "final_train_rmse": self.report.final_train_rmse,
            "params": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("format") != "fundrank/model":
            raise DataError(f"not a model bundle: format={doc.get('format')!r}")
        family = doc["family"]
        model = _loader(family)(doc["params"])
        return cls(
            family=family,
            ticker=doc["ticker"],
            seed=doc["seed"],
            model=model,
            report=TrainReport(final_train_rmse=doc["final_train_rmse"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _fit(family: str, X, y, config, seed: int, X_val=None, y_val=None):
    if family == "fnn":
        from . import fnn

        model = fnn.init(config, X.shape[1], seed)
        return fnn.train(model, X, y, config, X_val, y_val)
    if family == "rf":
        from . import rf

        forest = rf.fit(config, X, y, seed)
        return forest, TrainReport(final_train_rmse=rmse(forest.predict(X), y))
    if family == "anfis":
        from . import anfis

        rulebase = anfis.init_rulebase(config, X)
        return anfis.train(rulebase, X, y, config)
    raise ValueError(f"unknown model family {family!r}; expected one of {MODEL_FAMILIES}")


def _loader(family: str):
    if family == "fnn":
        from .fnn import FnnModel

        return FnnModel.from_dict
    if family == "rf":
        from .rf import Forest

        return Forest.from_dict
    if family == "anfis":
        from .anfis import RuleBase

        return RuleBase.from_dict
    raise ValueError(f"unknown model family {family!r}")


def thread_budget() -> int:
    """Worker cap from the FUNDRANK_THREADS env var (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def train_local_models(
    family: str,
    sample_set: "SampleSet",
    config,
    seed: int,
    *,
    min_train_samples: int = 20,
) -> dict[str, TrainedModel]:
    """One independently seeded model per ticker, trained on its train rows.

    Jobs may run on a thread pool (FUNDRANK_THREADS); the result is merged
    in sorted ticker order and is identical either way.
    """
    tickers = sample_set.tickers
    use_val = family == "fnn" and getattr(config, "patience", None) is not None

    def job(ticker: str) -> tuple[str, TrainedModel]:
        X, y = sample_set.matrix("train", ticker)
        if len(X) < min_train_samples:
            raise TooFewSamples(
                f"{ticker}: {len(X)} train samples < minimum {min_train_samples}"
            )
        X_val = y_val = None
        if use_val:
            X_val, y_val = sample_set.matrix("validation", ticker)
            if not len(X_val):
                X_val = y_val = None
        ticker_seed = derive_seed(seed, ticker)
        model, report = _fit(family, X, y, config, ticker_seed, X_val, y_val)
        return ticker, TrainedModel(
            family=family, ticker=ticker, seed=ticker_seed, model=model, report=report
        )

    workers = thread_budget()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(job, tickers))
    else:
        results = dict(job(t) for t in tickers)
    return {t: results[t] for t in sorted(results)}


def train_global_model(
    family: str, sample_set: "SampleSet", config, seed: int
) -> dict[str, TrainedModel]:
    """One model fitted on all tickers' pooled train rows, shared by every
    ticker. Provided for comparison with the default per-stock approach."""
    X, y = sample_set.matrix("train")
    if not len(X):
        raise TooFewSamples("no train samples")
    global_seed = derive_seed(seed, "__global__")
    model, report = _fit(family, X, y, config, global_seed)
    shared = {
        ticker: TrainedModel(
            family=family, ticker=ticker, seed=global_seed, model=model, report=report
        )
        for ticker in sample_set.tickers
    }
    return shared


def predict_all(
    models: dict[str, TrainedModel], sample_set: "SampleSet", partition: str
):
    """Predicted relative return for every (target quarter, ticker) in the
    partition."""
    from .evaluate import PredictionTable

    values: dict[tuple, float] = {}
    samples = sample_set.partition(partition)
    by_ticker: dict[str, list] = {}
    for s in samples:
        by_ticker.setdefault(s.ticker, []).append(s)
    for ticker in sorted(by_ticker):
        if ticker not in models:
            raise MissingModel(f"no trained model for {ticker}")
        rows = by_ticker[ticker]
        X = np.stack([s.features for s in rows])
        if sample_set.params is not None:
            X = sample_set.params.transform(X)
        preds = models[ticker].predict(X)
        for s, p in zip(rows, preds):
            if not math.isfinite(p):
                raise DataError(f"{ticker} {s.target_quarter}: non-finite prediction")
            values[(s.target_quarter, s.ticker)] = float(p)
    return PredictionTable(values=values)
