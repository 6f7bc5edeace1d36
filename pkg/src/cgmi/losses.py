"""Confidence-matching losses: score vector + target class -> scalar to minimize.

All losses take logit-scale scores.  A :class:`~cgmi.oracle.ScoreVector`
holding probabilities is converted with ``log(p + 1e-12)`` first.  Each loss
also accepts an ``(n, C)`` array and then returns ``n`` values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import ScoreVector

ONE_HOT_HIGH = 0.9999
POINCARE_EPS = 1e-6


@dataclass(frozen=True)
class TargetSpec:
    class_index: int
    one_hot_high: float = ONE_HOT_HIGH

    def __post_init__(self):
        if self.class_index < 0:
            raise ValueError("class_index must be >= 0")
        if not 0.0 < self.one_hot_high < 1.0:
            raise ValueError("one_hot_high must lie in (0, 1)")

    def one_hot(self, num_classes: int) -> np.ndarray:
        v = np.zeros(num_classes)
        v[self.class_index] = self.one_hot_high
        return v


def _target(t) -> TargetSpec:
    return t if isinstance(t, TargetSpec) else TargetSpec(int(t))


def _scores(s, t: TargetSpec) -> np.ndarray:
    s = s.logits() if isinstance(s, ScoreVector) else np.asarray(s, dtype=np.float64)
    if s.ndim not in (1, 2):
        raise ValueError("scores must be a vector or a batch of vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if t.class_index >= s.shape[-1]:
        raise ValueError(f"class {t.class_index} out of range for {s.shape[-1]} classes")
    return s


def _scalar(v, s):
    return float(v) if s.ndim == 1 else v


def cross_entropy_loss(s, t) -> float | np.ndarray:
    """Negative log-softmax of the target class (max-subtracted)."""
    t = _target(t)
    s = _scores(s, t)
    top = s.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(s - top).sum(axis=-1)) + top[..., 0]
    return _scalar(np.maximum(lse - s[..., t.class_index], 0.0), s)


def max_margin_loss(s, t) -> float | np.ndarray:
    """``-s_c + max_{j != c} s_j``."""
    t = _target(t)
    s = _scores(s, t)
    if s.shape[-1] < 2:
        raise ValueError("max-margin loss needs at least two classes")
    others = np.delete(s, t.class_index, axis=-1)
    return _scalar(others.max(axis=-1) - s[..., t.class_index], s)


def arcosh(y):
    y = np.maximum(y, 1.0)
    return np.log(y + np.sqrt(y * y - 1.0))


def poincare_distance(u, v, eps: float = POINCARE_EPS):
    """Hyperbolic distance in the Poincare ball, denominator clamped at ``eps``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    num = np.sum((u - v) ** 2, axis=-1)
    den = (1.0 - np.sum(u * u, axis=-1)) * (1.0 - np.sum(v * v, axis=-1))
    return arcosh(1.0 + 2.0 * num / np.maximum(eps, den))


def poincare_loss(s, t) -> float | np.ndarray:
    """Distance between the L1-normalized scores and the softened one-hot target."""
    t = _target(t)
    s = _scores(s, t)
    norm = np.abs(s).sum(axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("poincare loss is undefined for an all-zero score vector")
    u = s / norm
    return _scalar(poincare_distance(u, t.one_hot(s.shape[-1])), s)


LOSSES = {
    "poincare": poincare_loss,
    "max_margin": max_margin_loss,
    "cross_entropy": cross_entropy_loss,
}
DEFAULT_LOSS = "poincare"


def loss_by_name(name: str = DEFAULT_LOSS):
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None
