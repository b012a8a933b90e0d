"""Optimizers: plain SGD for the classical head, Adadelta for circuit angles.

Adadelta keeps two exponential accumulators (squared gradients and squared
updates) and needs no hand-tuned learning rate, which suits circuit angles
whose gradient scale differs from the dense layer's.  ``lr_scale`` is a
final multiplier on each update, 1.0 by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SgdConfig:
    learning_rate: float = 2.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


def sgd_step(params: np.ndarray, grads: np.ndarray, config: SgdConfig) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}")
    return params - config.learning_rate * grads


@dataclass
class AdadeltaState:
    """Per-parameter accumulators plus the three Adadelta hyperparameters."""

    accum_grad_sq: np.ndarray
    accum_update_sq: np.ndarray
    rho: float = 0.95
    epsilon: float = 1e-6
    lr_scale: float = 1.0

    def __post_init__(self) -> None:
        self.accum_grad_sq = np.asarray(self.accum_grad_sq, dtype=np.float64)
        self.accum_update_sq = np.asarray(self.accum_update_sq, dtype=np.float64)
        if self.accum_grad_sq.shape != self.accum_update_sq.shape:
            raise ValueError("accumulator shapes differ")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def zeros(
        cls,
        num_params: int,
        rho: float = 0.95,
        epsilon: float = 1e-6,
        lr_scale: float = 1.0,
    ) -> "AdadeltaState":
        return cls(
            np.zeros(num_params), np.zeros(num_params), rho, epsilon, lr_scale
        )


def adadelta_step(
    params: np.ndarray, grads: np.ndarray, state: AdadeltaState
) -> tuple[np.ndarray, AdadeltaState]:
    """One Adadelta update; returns new params and the advanced state."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.accum_grad_sq.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.accum_grad_sq.shape}"
        )
    rho, eps = state.rho, state.epsilon
    accum_grad_sq = rho * state.accum_grad_sq + (1.0 - rho) * grads**2
    update = -np.sqrt(state.accum_update_sq + eps) / np.sqrt(accum_grad_sq + eps) * grads
    accum_update_sq = rho * state.accum_update_sq + (1.0 - rho) * update**2
    new_state = AdadeltaState(
        accum_grad_sq, accum_update_sq, rho, eps, state.lr_scale
    )
    return params + state.lr_scale * update, new_state
