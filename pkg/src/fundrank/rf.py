"""Random-forest regressor built from variance-reduction trees.

Split rule: at each node a random feature subset is scanned; candidate
thresholds are midpoints between adjacent sorted values; the split with
the largest sum-of-squares decrease wins, ties broken by lowest feature
index then lowest threshold. Each tree draws its RNG stream from
SeedSequence(seed).spawn(tree_index), so fits are reproducible and
independent of tree scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoSplits, TooFewSamples


@dataclass(frozen=True)
class RfConfig:
    n_estimators: int = 100
    min_samples_split: int = 5
    max_features: int | None = None  # None -> ceil(p / 3)
    max_depth: int | None = None
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")

    def resolved_max_features(self, p: int) -> int:
        if self.max_features is None:
            return max(1, math.ceil(p / 3))
        if self.max_features > p:
            raise ValueError(f"max_features {self.max_features} > {p} features")
        return self.max_features


@dataclass
class Tree:
    """Flat-array binary tree; feature[i] == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance_raw: np.ndarray  # per-feature sum-of-squares decrease

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def predict_one(self, x: np.ndarray) -> float:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return float(self.value[i])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "importance_raw": self.importance_raw.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            feature=np.array(doc["feature"], dtype=np.int64),
            threshold=np.array(doc["threshold"], dtype=float),
            left=np.array(doc["left"], dtype=np.int64),
            right=np.array(doc["right"], dtype=np.int64),
            value=np.array(doc["value"], dtype=float),
            importance_raw=np.array(doc["importance_raw"], dtype=float),
        )


@dataclass(frozen=True)
class FeatureImportance:
    """Normalized mean impurity-decrease per feature, with across-tree std."""

    scores: np.ndarray
    std: np.ndarray


@dataclass
class Forest:
    trees: list[Tree]
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += [tree.predict_one(x) for x in X]
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            n_features=int(doc["n_features"]),
        )


def _best_split(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray, features: np.ndarray
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, ss_decrease) over the candidate features,
    or None when no threshold separates the node."""
    y_node = y[idx]
    n = len(idx)
    total = y_node.sum()
    node_sse = float(np.sum(y_node * y_node) - total * total / n)
    best: tuple[int, float, float] | None = None
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        sx = xs[order]
        sy = y_node[order]
        cut = np.flatnonzero(sx[1:] > sx[:-1]) + 1  # left part sizes
        if not len(cut):
            continue
        cs = np.cumsum(sy)
        css = np.cumsum(sy * sy)
        nl = cut.astype(float)
        nr = n - nl
        sum_l = cs[cut - 1]
        sq_l = css[cut - 1]
        sse_l = sq_l - sum_l * sum_l / nl
        sse_r = (css[-1] - sq_l) - (cs[-1] - sum_l) ** 2 / nr
        decrease = node_sse - (sse_l + sse_r)
        k = int(np.argmax(decrease))
        if decrease[k] <= 0:
            continue
        threshold = float((sx[cut[k] - 1] + sx[cut[k]]) / 2.0)
        if best is None or decrease[k] > best[2]:
            best = (int(f), threshold, float(decrease[k]))
    return best


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    config: RfConfig,
    max_features: int,
    rng: np.random.Generator,
    nodes: dict[str, list],
    importance: np.ndarray,
    depth: int,
) -> int:
    node = len(nodes["feature"])
    for key in nodes:
        nodes[key].append(0)
    y_node = y[idx]
    mean = float(y_node.mean())
    stop = (
        len(idx) < config.min_samples_split
        or (config.max_depth is not None and depth >= config.max_depth)
        or np.ptp(y_node) == 0
    )
    split = None
    if not stop:
        p = X.shape[1]
        if max_features >= p:
            cand = np.arange(p)
        else:
            cand = np.sort(rng.choice(p, size=max_features, replace=False))
        split = _best_split(X, y, idx, cand)
    if split is None:
        nodes["feature"][node] = -1
        nodes["threshold"][node] = 0.0
        nodes["left"][node] = -1
        nodes["right"][node] = -1
        nodes["value"][node] = mean
        return node
    f, threshold, decrease = split
    importance[f] += decrease
    go_left = X[idx, f] <= threshold
    nodes["feature"][node] = f
    nodes["threshold"][node] = threshold
    nodes["value"][node] = mean
    nodes["left"][node] = _grow(
        X, y, idx[go_left], config, max_features, rng, nodes, importance, depth + 1
    )
    nodes["right"][node] = _grow(
        X, y, idx[~go_left], config, max_features, rng, nodes, importance, depth + 1
    )
    return node


def _fit_tree(
    X: np.ndarray, y: np.ndarray, config: RfConfig, max_features: int, rng: np.random.Generator
) -> Tree:
    n = len(X)
    if config.bootstrap:
        idx = rng.integers(0, n, size=n)
    else:
        idx = np.arange(n)
    nodes: dict[str, list] = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
    importance = np.zeros(X.shape[1])
    _grow(X, y, idx, config, max_features, rng, nodes, importance, depth=0)
    return Tree(
        feature=np.array(nodes["feature"], dtype=np.int64),
        threshold=np.array(nodes["threshold"], dtype=float),
        left=np.array(nodes["left"], dtype=np.int64),
        right=np.array(nodes["right"], dtype=np.int64),
        value=np.array(nodes["value"], dtype=float),
        importance_raw=importance,
    )


def fit(config: RfConfig, X: np.ndarray, y: np.ndarray, seed: int) -> Forest:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise DimensionMismatch(f"{len(X)} rows vs {len(y)} targets")
    if len(X) < config.min_samples_split:
        raise TooFewSamples(
            f"{len(X)} samples < min_samples_split {config.min_samples_split}"
        )
    max_features = config.resolved_max_features(X.shape[1])
    streams = np.random.SeedSequence(seed).spawn(config.n_estimators)
    trees = [
        _fit_tree(X, y, config, max_features, np.random.default_rng(ss)) for ss in streams
    ]
    return Forest(trees=trees, n_features=X.shape[1])


def predict(forest: Forest, x: np.ndarray) -> float:
    """Mean of the per-tree leaf predictions for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != forest.n_features:
        raise DimensionMismatch(f"expected vector of length {forest.n_features}")
    return float(forest.predict(x[None, :])[0])


def importance(forest: Forest) -> FeatureImportance:
    """Impurity-based importance: each tree's raw decrease vector is
    normalized to sum 1, then averaged; std is across trees."""
    vectors = []
    for tree in forest.trees:
        total = tree.importance_raw.sum()
        if total > 0:
            vectors.append(tree.importance_raw / total)
    if not vectors:
        raise NoSplits("every tree is a single leaf")
    stacked = np.stack(vectors)
    return FeatureImportance(scores=stacked.mean(axis=0), std=stacked.std(axis=0))
