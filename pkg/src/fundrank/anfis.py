"""Takagi-Sugeno neuro-fuzzy regressor with hybrid training.

Five-stage forward pass: bell memberships per input, rule firing by
product, normalization, first-order rule polynomials, weighted average.
Training alternates a ridge-regularized least-squares solve of the
consequent coefficients (premises fixed) with a gradient step on the
bell parameters (consequents fixed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import (
    DegenerateFiring,
    DimensionMismatch,
    NonFiniteLoss,
    RuleCapExceeded,
    UnderDetermined,
)
from .model_core import TrainReport

FIRING_FLOOR = 1e-300
RIDGE_FLOOR = 1e-8

# Keeps bell functions well-behaved under gradient updates: a must stay
# positive, and b > 0.5 keeps d(mu)/dc finite at a point exactly on a center.
MIN_WIDTH = 1e-9
MIN_SLOPE = 0.51


@dataclass(frozen=True)
class AnfisConfig:
    mfs_per_input: int = 2
    rule_cap: int = 256
    premise_learning_rate: float = 0.005
    epochs: int = 200
    ridge: float = RIDGE_FLOOR

    def __post_init__(self) -> None:
        if self.mfs_per_input < 1:
            raise ValueError("mfs_per_input must be >= 1")
        if self.rule_cap < 1:
            raise ValueError("rule_cap must be >= 1")


@dataclass(frozen=True)
class MembershipFunction:
    """Generalized bell: mu(x) = 1 / (1 + |(x - c)/a|^(2b))."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise ValueError("bell width and slope must be > 0")

    def value(self, x: float) -> float:
        t = abs((x - self.c) / self.a)
        return 1.0 / (1.0 + t ** (2.0 * self.b))


@dataclass
class RuleBase:
    """One bell MF grid per input plus per-rule first-order consequents.

    `a`, `b`, `c` have shape (n_inputs, mfs_per_input); `rules` is the full
    Cartesian grid (n_rules, n_inputs) of MF indices; `consequents` is
    (n_rules, n_inputs + 1), constant term last.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    rules: np.ndarray
    consequents: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.a.shape[0]

    @property
    def n_rules(self) -> int:
        return self.rules.shape[0]

    @property
    def membership_functions(self) -> list[list[MembershipFunction]]:
        return [
            [
                MembershipFunction(a=float(self.a[j, m]), b=float(self.b[j, m]), c=float(self.c[j, m]))
                for m in range(self.a.shape[1])
            ]
            for j in range(self.n_inputs)
        ]

    def copy(self) -> "RuleBase":
        return RuleBase(
            a=self.a.copy(),
            b=self.b.copy(),
            c=self.c.copy(),
            rules=self.rules,
            consequents=self.consequents.copy(),
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        wbar = layer3_normalize(layer2_firing(self, layer1_memberships(self, X)))
        return layer4_5_output(self, wbar, X)

    def to_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "consequents": self.consequents.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RuleBase":
        a = np.array(doc["a"], dtype=float)
        return cls(
            a=a,
            b=np.array(doc["b"], dtype=float),
            c=np.array(doc["c"], dtype=float),
            rules=_rule_grid(a.shape[0], a.shape[1]),
            consequents=np.array(doc["consequents"], dtype=float),
        )


def _rule_grid(n_inputs: int, n_mfs: int) -> np.ndarray:
    return np.array(list(product(range(n_mfs), repeat=n_inputs)), dtype=np.int64)


def init_rulebase(config: AnfisConfig, X: np.ndarray) -> RuleBase:
    """Grid rule base over the train range of each input.

    Centers are equally spaced over [min, max]; width a = range/(2m - 2)
    for m >= 2 (range/2 for a single MF); slope b = 2.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    m = config.mfs_per_input
    n_rules = m ** d
    if n_rules > config.rule_cap:
        raise RuleCapExceeded(
            f"{m} MFs over {d} inputs would generate {n_rules} rules "
            f"(cap {config.rule_cap}); reduce the input count or the grid"
        )
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    if m == 1:
        c = ((lo + hi) / 2.0)[:, None]
        a = (span / 2.0)[:, None]
    else:
        c = np.linspace(lo, hi, m, axis=1)
        a = np.repeat((span / (2.0 * m - 2.0))[:, None], m, axis=1)
    b = np.full((d, m), 2.0)
    return RuleBase(
        a=a,
        b=b,
        c=c,
        rules=_rule_grid(d, m),
        consequents=np.zeros((n_rules, d + 1)),
    )


def layer1_memberships(rulebase: RuleBase, X: np.ndarray) -> np.ndarray:
    """Bell membership of every input value in every MF: (n, d, m)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != rulebase.n_inputs:
        raise DimensionMismatch(
            f"expected {rulebase.n_inputs} inputs, got {X.shape[1]}"
        )
    t = np.abs((X[:, :, None] - rulebase.c) / rulebase.a)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + t ** (2.0 * rulebase.b))


def layer2_firing(rulebase: RuleBase, memberships: np.ndarray) -> np.ndarray:
    """Per-rule firing strength: product of the rule's memberships, (n, R)."""
    n = memberships.shape[0]
    w = np.ones((n, rulebase.n_rules))
    for j in range(rulebase.n_inputs):
        w *= memberships[:, j, rulebase.rules[:, j]]
    return w


def layer3_normalize(w: np.ndarray) -> np.ndarray:
    """Firing strengths normalized to sum 1 per sample."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    totals = w.sum(axis=1)
    if np.any(totals < FIRING_FLOOR):
        raise DegenerateFiring("total firing strength underflowed")
    return w / totals[:, None]


def layer4_5_output(rulebase: RuleBase, wbar: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Weighted average of the rule polynomials: sum_r wbar_r * f_r(x)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    wbar = np.atleast_2d(np.asarray(wbar, dtype=float))
    xext = np.hstack([X, np.ones((X.shape[0], 1))])
    f = xext @ rulebase.consequents.T
    return np.einsum("nr,nr->n", wbar, f)


def _solve_consequents(
    wbar: np.ndarray, xext: np.ndarray, y: np.ndarray, ridge: float
) -> np.ndarray:
    """Ridge least squares on the firing-weighted design matrix."""
    n, r = wbar.shape
    k = xext.shape[1]
    design = (wbar[:, :, None] * xext[:, None, :]).reshape(n, r * k)
    gram = design.T @ design
    gram[np.diag_indices_from(gram)] += max(ridge, RIDGE_FLOOR)
    # non-finite targets surface as a non-finite loss immediately after
    with np.errstate(invalid="ignore", over="ignore"):
        theta = np.linalg.solve(gram, design.T @ y)
    return theta.reshape(r, k)


def _premise_gradients(
    rulebase: RuleBase,
    X: np.ndarray,
    y: np.ndarray,
    mu: np.ndarray,
    w: np.ndarray,
    wbar: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of mean squared error w.r.t. the bell parameters.

    Uses dL/dw_r = g * (f_r - o)/S with S the per-sample firing total, then
    routes through the product structure: dw_r/dmu_(j,m) = w_r / mu_(j,m)
    for rules using that MF.
    """
    n, d = X.shape
    xext = np.hstack([X, np.ones((n, 1))])
    f = xext @ rulebase.consequents.T
    out = np.einsum("nr,nr->n", wbar, f)
    totals = w.sum(axis=1)
    g = (2.0 / n) * (out - y)
    dl_dw = g[:, None] * (f - out[:, None]) / totals[:, None]
    m = rulebase.a.shape[1]
    grad_a = np.zeros_like(rulebase.a)
    grad_b = np.zeros_like(rulebase.b)
    grad_c = np.zeros_like(rulebase.c)
    t = np.abs((X[:, :, None] - rulebase.c) / rulebase.a)
    sign = np.sign(X[:, :, None] - rulebase.c)
    one_minus_mu = 1.0 - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        log_t = np.where(t > 0, np.log(t), 0.0)
        t_pow = np.where(t > 0, t ** (2.0 * rulebase.b - 1.0), 0.0)
    gw_w = dl_dw * w
    for j in range(d):
        # sum of dL/dw_r * w_r over the rules that use MF (j, m)
        onehot = rulebase.rules[:, j][:, None] == np.arange(m)[None, :]
        p = gw_w @ onehot.astype(float)  # (n, m)
        # dmu/d(param) / mu, so w_r/mu * dmu = w_r * (that ratio)
        ratio_a = 2.0 * rulebase.b[j] * one_minus_mu[:, j, :] / rulebase.a[j]
        ratio_c = (
            2.0 * rulebase.b[j] * one_minus_mu[:, j, :] * sign[:, j, :]
            * np.where(t[:, j, :] > 0, 1.0 / np.where(t[:, j, :] > 0, t[:, j, :], 1.0), 0.0)
            / rulebase.a[j]
        )
        ratio_b = -2.0 * one_minus_mu[:, j, :] * log_t[:, j, :]
        grad_a[j] = (p * ratio_a).sum(axis=0)
        grad_c[j] = (p * ratio_c).sum(axis=0)
        grad_b[j] = (p * ratio_b).sum(axis=0)
    return grad_a, grad_b, grad_c


def train(
    rulebase: RuleBase, X: np.ndarray, y: np.ndarray, config: AnfisConfig
) -> tuple[RuleBase, TrainReport]:
    """Hybrid epochs: LSE consequent solve, then one premise gradient step.

    The recorded loss trace holds the train RMSE after each epoch's LSE
    step; the final epoch performs no premise update, so the returned
    model matches the last trace entry exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[1] != rulebase.n_inputs:
        raise DimensionMismatch(f"expected {rulebase.n_inputs} inputs, got {X.shape[1]}")
    if len(X) != len(y):
        raise DimensionMismatch(f"{len(X)} rows vs {len(y)} targets")
    n_params = rulebase.n_rules * (rulebase.n_inputs + 1)
    if len(X) < n_params:
        raise UnderDetermined(
            f"{len(X)} samples cannot determine {n_params} consequent parameters"
        )
    rb = rulebase.copy()
    xext = np.hstack([X, np.ones((len(X), 1))])
    trace: list[float] = []
    for epoch in range(config.epochs):
        mu = layer1_memberships(rb, X)
        w = layer2_firing(rb, mu)
        wbar = layer3_normalize(w)
        rb.consequents = _solve_consequents(wbar, xext, y, config.ridge)
        out = np.einsum("nr,nr->n", wbar, xext @ rb.consequents.T)
        loss = float(np.mean((out - y) ** 2))
        if not math.isfinite(loss):
            raise NonFiniteLoss("hybrid training diverged")
        trace.append(math.sqrt(loss))
        if epoch == config.epochs - 1:
            break
        grad_a, grad_b, grad_c = _premise_gradients(rb, X, y, mu, w, wbar)
        lr = config.premise_learning_rate
        rb.a = np.maximum(rb.a - lr * grad_a, MIN_WIDTH)
        rb.b = np.maximum(rb.b - lr * grad_b, MIN_SLOPE)
        rb.c = rb.c - lr * grad_c
    final = trace[-1] if trace else float(np.sqrt(np.mean((rb.predict(X) - y) ** 2)))
    return rb, TrainReport(final_train_rmse=final, loss_trace=tuple(trace))
