"""Forest-importance feature selection over the pooled train partition."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import rf
from .errors import IndexOutOfRange, KTooLarge
from .preprocess import Sample, SampleSet, StandardizationParams


@dataclass(frozen=True)
class FeatureSubset:
    """Selected feature indices, ordered by importance (descending)."""

    indices: tuple[int, ...]
    names: tuple[str, ...]
    importances: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {
            "format": "fundrank/feature-subset",
            "version": 1,
            "indices": list(self.indices),
            "names": list(self.names),
            "importances": list(self.importances),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSubset":
        return cls(
            indices=tuple(doc["indices"]),
            names=tuple(doc["names"]),
            importances=tuple(doc["importances"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSubset":
        return cls.from_dict(json.loads(Path(path).read_text()))


def select_features(
    sample_set: SampleSet, rf_config: rf.RfConfig, k: int, seed: int
) -> FeatureSubset:
    """Fit one forest on all tickers' pooled train rows; keep the k most
    important features, importance-descending, ties by lowest index."""
    p = len(sample_set.feature_names)
    if k > p:
        raise KTooLarge(f"k={k} exceeds {p} features")
    X, y = sample_set.matrix("train")
    forest = rf.fit(rf_config, X, y, seed)
    scores = rf.importance(forest).scores
    order = np.lexsort((np.arange(p), -scores))
    top = order[:k]
    return FeatureSubset(
        indices=tuple(int(i) for i in top),
        names=tuple(sample_set.feature_names[i] for i in top),
        importances=tuple(float(scores[i]) for i in top),
    )


def project(sample_set: SampleSet, subset: FeatureSubset) -> SampleSet:
    """Restrict every partition to the selected columns.

    Scaling params are sliced, not refitted: per-feature statistics are
    unaffected by dropping other columns.
    """
    p = len(sample_set.feature_names)
    for i in subset.indices:
        if not 0 <= i < p:
            raise IndexOutOfRange(f"feature index {i} out of range 0..{p - 1}")
    idx = list(subset.indices)
    params = sample_set.params
    if params is not None:
        params = StandardizationParams(
            mean=params.mean[idx].copy(), std=params.std[idx].copy()
        )
    samples = tuple(
        Sample(
            ticker=s.ticker,
            feature_quarter=s.feature_quarter,
            target_quarter=s.target_quarter,
            features=s.features[idx].copy(),
            target=s.target,
        )
        for s in sample_set.samples
    )
    return replace(
        sample_set,
        feature_names=tuple(sample_set.feature_names[i] for i in idx),
        samples=samples,
        params=params,
    )
