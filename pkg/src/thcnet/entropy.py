"""Shannon and Tsallis-Havrda-Charvat (THC) entropies and the binary
cross-entropy losses built from them.

The THC family is parametrized by alpha > 0 and recovers Shannon entropy
in the limit alpha -> 1:

    H_alpha(q)     = (1 / (alpha - 1)) * (1 - sum_i q_i^alpha)
    H_alpha(q : p) = (1 / (alpha - 1)) * (1 - sum_i q_i^(alpha-1) * p_i)

Both are generated by the convex function h_alpha(u) = (u^alpha - u) / (alpha - 1)
with h_alpha(1) = 0, whose alpha -> 1 limit is u*log(u).

Conventions used throughout this module:

* natural logarithm everywhere, so values are in nats;
* predicted probabilities are clamped to [EPSILON, 1 - EPSILON] before
  logs or negative powers (EPSILON = 1e-7), which removes the log(0)
  singularity and the alpha < 2 gradient blow-up at the boundary;
* an alpha within SHANNON_ALPHA_TOL of 1 routes to the Shannon formulas,
  avoiding the 0/0 cancellation in (1 - sum q^alpha) / (alpha - 1);
* all arithmetic is float64 and every loss returns a finite Python float.

All functions are pure; there is no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptyBatch, InvalidSimplex

#: Probability clamp applied to predictions before logs / negative powers.
EPSILON = 1e-7

#: |alpha - 1| below this treats alpha as the Shannon limit.
SHANNON_ALPHA_TOL = 1e-6

#: Absolute tolerance on sum(p) == 1 for simplex validation.
SIMPLEX_ATOL = 1e-9

#: Losses are plain non-negative finite floats (nats).
LossValue = float


@dataclass(frozen=True, eq=False)
class Alpha:
    """The THC hyperparameter alpha > 0."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or v <= 0.0:
            raise DomainError(f"alpha must be a positive real, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def is_shannon_limit(self) -> bool:
        return abs(self.value - 1.0) < SHANNON_ALPHA_TOL

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"Alpha({self.value!r})"


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """A point on the k-simplex, k >= 1.

    Elements must lie in [0, 1] and sum to 1 within SIMPLEX_ATOL.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise InvalidSimplex("probability vector must be 1-D with k >= 1")
        if not np.all(np.isfinite(v)):
            raise InvalidSimplex("probability vector contains non-finite entries")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise InvalidSimplex("probabilities must lie in [0, 1]")
        if abs(float(v.sum()) - 1.0) > SIMPLEX_ATOL:
            raise InvalidSimplex(f"probabilities sum to {float(v.sum())}, not 1")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class BinaryBatch:
    """True binary labels paired with predicted recurrence probabilities."""

    labels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.labels)
        q = np.asarray(self.probs, dtype=np.float64)
        if y.ndim != 1 or q.ndim != 1:
            raise DimensionMismatch("labels and probs must be 1-D sequences")
        if y.size != q.size:
            raise DimensionMismatch(
                f"labels ({y.size}) and probs ({q.size}) differ in length"
            )
        if y.size == 0:
            raise EmptyBatch("batch must contain at least one item")
        if not np.all(np.isin(y, (0, 1))):
            raise DomainError("labels must be 0 or 1")
        if not np.all(np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
            raise DomainError("probs must lie in [0, 1]")
        object.__setattr__(self, "labels", y.astype(np.float64))
        object.__setattr__(self, "probs", q)

    @property
    def size(self) -> int:
        return int(self.labels.size)


def _as_alpha(alpha) -> Alpha:
    return alpha if isinstance(alpha, Alpha) else Alpha(float(alpha))


def _as_simplex(p) -> np.ndarray:
    if isinstance(p, ProbabilityVector):
        return p.values
    return ProbabilityVector(np.asarray(p)).values


def _finite(x: float) -> float:
    if not math.isfinite(x):
        raise ArithmeticError(f"loss evaluated to a non-finite value: {x!r}")
    return float(x)


def clamp_probability(q: float, epsilon: float = EPSILON) -> float:
    """Clamp a probability into [epsilon, 1 - epsilon]."""
    if not 0.0 < epsilon < 0.5:
        raise DomainError(f"epsilon must lie in (0, 0.5), got {epsilon!r}")
    return min(max(q, epsilon), 1.0 - epsilon)


def _clamp_array(q: np.ndarray, epsilon: float = EPSILON) -> np.ndarray:
    return np.clip(q, epsilon, 1.0 - epsilon)


def shannon_entropy(p) -> LossValue:
    """-sum_i p_i log(p_i) with the convention 0 log 0 = 0.

    Zero for a Dirac vector, log(k) for the uniform vector.
    """
    v = _as_simplex(p)
    nz = v[v > 0.0]
    return _finite(max(0.0, -float(np.sum(nz * np.log(nz)))))


def shannon_cross_entropy(q, p) -> LossValue:
    """-sum_i p_i log(q_i), with q clamped away from {0, 1} before the log."""
    qv = _as_simplex(q)
    pv = _as_simplex(p)
    if qv.size != pv.size:
        raise DimensionMismatch(f"q has length {qv.size}, p has length {pv.size}")
    qc = _clamp_array(qv)
    return _finite(max(0.0, -float(np.sum(pv * np.log(qc)))))


def thc_generator(u: float, alpha) -> float:
    """Generator h_alpha(u) = (u^alpha - u) / (alpha - 1) on [0, 1].

    Convex with h_alpha(1) = 0; the Shannon limit is u log(u) (0 at u = 0).
    """
    a = _as_alpha(alpha)
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"generator argument must lie in [0, 1], got {u!r}")
    if a.is_shannon_limit:
        return 0.0 if u == 0.0 else u * math.log(u)
    return (u ** a.value - u) / (a.value - 1.0)


def thc_entropy(q, alpha) -> LossValue:
    """(1 / (alpha - 1)) * (1 - sum_i q_i^alpha); >= 0 on the simplex."""
    a = _as_alpha(alpha)
    if a.is_shannon_limit:
        return shannon_entropy(q)
    qv = _as_simplex(q)
    s = float(np.sum(qv ** a.value))
    return _finite(max(0.0, (1.0 - s) / (a.value - 1.0)))


def thc_cross_entropy(q, p, alpha) -> LossValue:
    """(1 / (alpha - 1)) * (1 - sum_i q_i^(alpha-1) p_i).

    For alpha < 1 the exponent alpha - 1 is negative and q is clamped
    away from 0 first.  Zero iff q matches a Dirac target p.
    """
    a = _as_alpha(alpha)
    if a.is_shannon_limit:
        return shannon_cross_entropy(q, p)
    qv = _as_simplex(q)
    pv = _as_simplex(p)
    if qv.size != pv.size:
        raise DimensionMismatch(f"q has length {qv.size}, p has length {pv.size}")
    if a.value < 1.0:
        qv = _clamp_array(qv)
    s = float(np.sum(qv ** (a.value - 1.0) * pv))
    return _finite((1.0 - s) / (a.value - 1.0))


def binary_shannon_loss(batch: BinaryBatch) -> LossValue:
    """Batched binary cross-entropy, -mean(p log q + (1-p) log(1-q))."""
    p = batch.labels
    q = _clamp_array(batch.probs)
    return _finite(
        max(0.0, -float(np.mean(p * np.log(q) + (1.0 - p) * np.log(1.0 - q))))
    )


def binary_thc_loss(batch: BinaryBatch, alpha) -> LossValue:
    """Batched binary THC cross-entropy.

    (1 / (alpha - 1)) * (1 - mean(q^(alpha-1) p + (1-q)^(alpha-1) (1-p))),
    with q clamped into [EPSILON, 1 - EPSILON].  Routes to
    binary_shannon_loss in the Shannon limit.
    """
    a = _as_alpha(alpha)
    if a.is_shannon_limit:
        return binary_shannon_loss(batch)
    p = batch.labels
    q = _clamp_array(batch.probs)
    e = a.value - 1.0
    m = float(np.mean(q ** e * p + (1.0 - q) ** e * (1.0 - p)))
    return _finite(max(0.0, (1.0 - m) / e))


def binary_thc_loss_grad(batch: BinaryBatch, alpha) -> np.ndarray:
    """Closed-form gradient of binary_thc_loss w.r.t. each clamped q_n.

    Component n is -(1/N) * (q_n^(alpha-2) p_n - (1-q_n)^(alpha-2) (1-p_n));
    the Shannon limit is -(1/N) * (p_n/q_n - (1-p_n)/(1-q_n)).  Evaluated
    at the clamped probabilities.
    """
    a = _as_alpha(alpha)
    p = batch.labels
    q = _clamp_array(batch.probs)
    n = batch.size
    if a.is_shannon_limit:
        g = -(p / q - (1.0 - p) / (1.0 - q)) / n
    else:
        e = a.value - 2.0
        g = -(q ** e * p - (1.0 - q) ** e * (1.0 - p)) / n
    if not np.all(np.isfinite(g)):
        raise ArithmeticError("gradient evaluated to a non-finite value")
    return g
