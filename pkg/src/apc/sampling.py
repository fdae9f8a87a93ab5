"""Categorical sampling and log-probabilities over action logits."""

from __future__ import annotations

import numpy as np

from . import tape as T


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def categorical_sample(logits, rng: np.random.Generator) -> int:
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    p = softmax(logits)
    cum = np.cumsum(p)
    u = rng.random()
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, logits.shape[0] - 1)


def categorical_log_prob(logits, index):
    """log softmax(logits)[index]; differentiable when logits is a Var."""
    k = (logits.data if isinstance(logits, T.Var) else np.asarray(logits)).shape[-1]
    if not 0 <= int(index) < k:
        raise IndexError(f"index {index} out of range for {k} categories")
    return T.log_softmax_pick(logits, int(index))
