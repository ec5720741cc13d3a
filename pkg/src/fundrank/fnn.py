"""Feed-forward network regressor trained by full-batch gradient descent.

Tiny per-stock datasets make full-batch training both fast and exactly
reproducible: permuting sample order cannot change the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimension, DimensionMismatch, NonFiniteLoss
from .model_core import TrainReport, rmse

_ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class FnnConfig:
    hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"
    learning_rate: float = 0.01
    epochs: int = 500
    patience: int | None = None

    def __post_init__(self) -> None:
        if any(h < 1 for h in self.hidden):
            raise BadDimension(f"hidden sizes must be >= 1, got {self.hidden}")
        if self.learning_rate <= 0:
            raise BadDimension("learning rate must be > 0")
        if self.activation not in _ACTIVATIONS:
            raise BadDimension(f"activation must be one of {_ACTIVATIONS}")


@dataclass
class FnnModel:
    """Per-layer weights (fan_out, fan_in) and biases; linear output unit."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    def copy(self) -> "FnnModel":
        return FnnModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} inputs, got {X.shape[1]}")
        return _forward(self, X)[-1][:, 0]

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FnnModel":
        return cls(
            weights=[np.array(w, dtype=float) for w in doc["weights"]],
            biases=[np.array(b, dtype=float) for b in doc["biases"]],
            activation=doc["activation"],
        )


def init(config: FnnConfig, input_dim: int, seed: int) -> FnnModel:
    """Uniform fan-based weight init in +/- sqrt(6/(fan_in+fan_out)); zero biases."""
    if input_dim < 1:
        raise BadDimension(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    sizes = (input_dim,) + tuple(config.hidden) + (1,)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return FnnModel(weights=weights, biases=biases, activation=config.activation)


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "relu":
        return (z > 0).astype(float)
    return np.ones_like(z)


def _forward(model: FnnModel, X: np.ndarray) -> list[np.ndarray]:
    """Activations per layer; last entry is the (n, 1) linear output."""
    acts = [X]
    a = X
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        a = z if l == last else _act(z, model.activation)
        acts.append(a)
    return acts


def forward(model: FnnModel, x: np.ndarray) -> float:
    """Network output for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise DimensionMismatch(f"expected vector of length {model.input_dim}")
    return float(model.predict(x[None, :])[0])


def gradients(
    model: FnnModel, X: np.ndarray, y: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backprop gradients of mean squared error over the batch.

    Loss is mean((pred - y)^2); returns per-layer (dW, db) matching the
    model's parameter shapes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    # re-run the forward pass keeping pre-activations
    zs: list[np.ndarray] = []
    acts = [X]
    a = X
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        zs.append(z)
        a = z if l == last else _act(z, model.activation)
        acts.append(a)
    pred = acts[-1][:, 0]
    delta = (2.0 / n) * (pred - y)[:, None]
    grads_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for l in range(last, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * _act_grad(zs[l - 1], model.activation)
    return grads_w, grads_b


def mse(model: FnnModel, X: np.ndarray, y: np.ndarray) -> float:
    diff = model.predict(X) - np.asarray(y, dtype=float).ravel()
    with np.errstate(over="ignore"):
        return float(np.mean(diff * diff))


def train(
    model: FnnModel,
    X: np.ndarray,
    y: np.ndarray,
    config: FnnConfig,
    X_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> tuple[FnnModel, TrainReport]:
    """Full-batch gradient descent on MSE; the input model is not mutated.

    When a validation set and a patience are given, training stops once
    validation RMSE has not improved for `patience` epochs and the best
    weights seen are returned.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) == 0 or len(X) != len(y):
        raise DimensionMismatch(f"got {len(X)} samples and {len(y)} targets")
    m = model.copy()
    trace: list[float] = []
    use_early_stop = (
        config.patience is not None and X_val is not None and len(np.atleast_2d(X_val))
    )
    best_val = math.inf
    best_state: FnnModel | None = None
    stale = 0
    for _ in range(config.epochs):
        grads_w, grads_b = gradients(m, X, y)
        for l in range(len(m.weights)):
            m.weights[l] -= config.learning_rate * grads_w[l]
            m.biases[l] -= config.learning_rate * grads_b[l]
        loss = mse(m, X, y)
        if not math.isfinite(loss):
            raise NonFiniteLoss("training diverged; lower the learning rate")
        trace.append(math.sqrt(loss))
        if use_early_stop:
            val_rmse = rmse(m.predict(X_val), np.asarray(y_val, dtype=float).ravel())
            if val_rmse < best_val:
                best_val = val_rmse
                best_state = m.copy()
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if best_state is not None:
        m = best_state
    final = math.sqrt(mse(m, X, y))
    return m, TrainReport(final_train_rmse=final, loss_trace=tuple(trace))
