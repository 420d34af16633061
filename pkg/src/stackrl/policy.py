"""Soft-max action distributions and their greedy / uniform limits."""

from __future__ import annotations

import math

import numpy as np


def soft_max(values, alpha: float, axis: int = -1) -> np.ndarray:
    """Probabilities proportional to ``exp(alpha * values)`` along ``axis``.

    ``alpha = 0`` gives the uniform distribution and ``alpha = inf`` a point mass
    on the argmax (lowest index on ties). Works on stacked inputs.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0 or x.shape[axis] == 0:
        raise ValueError("soft_max of an empty vector")
    if np.isnan(x).any():
        raise ValueError("soft_max input contains NaN")
    if not alpha >= 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha!r}")
    if math.isinf(alpha):
        idx = np.expand_dims(np.argmax(x, axis=axis), axis)
        out = np.zeros_like(x)
        np.put_along_axis(out, idx, 1.0, axis=axis)
        return out
    if alpha == 0:
        return np.full_like(x, 1.0 / x.shape[axis])
    z = alpha * (x - x.max(axis=axis, keepdims=True))
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _check_dist(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"not a probability vector: {p}")
    return p


def sample(probs, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using one uniform from ``rng``."""
    p = _check_dist(probs)
    u = rng.random()
    i = int(np.searchsorted(np.cumsum(p), u, side="right"))
    # u can land past a cumsum that rounds below 1; fall back to the last supported index.
    if i >= p.size:
        i = int(np.flatnonzero(p > 0)[-1])
    return i


def expected_value(probs, values) -> float:
    p = np.asarray(probs, dtype=float)
    v = np.asarray(values, dtype=float)
    if p.shape != v.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {v.shape}")
    return float(p @ v)
