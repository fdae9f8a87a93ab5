"""Bias-corrected Adam over flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import ParamVector


class NonFiniteGradientError(ValueError):
    """Update rejected: gradient contains NaN or inf."""


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, n_params: int, learning_rate: float, **kw):
        return cls(
            first_moment=np.zeros(n_params),
            second_moment=np.zeros(n_params),
            step_count=0,
            learning_rate=learning_rate,
            **kw,
        )

    def copy(self):
        return AdamState(
            self.first_moment.copy(),
            self.second_moment.copy(),
            self.step_count,
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
        )


def adam_step_inplace(state: AdamState, values: np.ndarray, grad: np.ndarray):
    """Mutating update used by training loops (single writer)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != values.shape:
        raise ValueError(f"gradient shape {grad.shape} != params {values.shape}")
    if not np.all(np.isfinite(grad)):
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise NonFiniteGradientError(f"{bad} non-finite gradient entries; update rejected")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    state.first_moment *= b1
    state.first_moment += (1.0 - b1) * grad
    state.second_moment *= b2
    state.second_moment += (1.0 - b2) * grad * grad
    m_hat = state.first_moment / (1.0 - b1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - b2 ** state.step_count)
    values -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def adam_step(state: AdamState, params, grad):
    """Functional update; accepts a ParamVector or a flat ndarray."""
    if isinstance(params, ParamVector):
        out = params.copy()
        new_state = state.copy()
        adam_step_inplace(new_state, out.values, grad)
        return out, new_state
    values = np.array(params, dtype=np.float64)
    new_state = state.copy()
    adam_step_inplace(new_state, values, grad)
    return values, new_state
