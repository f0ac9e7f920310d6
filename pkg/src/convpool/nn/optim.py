"""Adam on flat float32 parameter vectors, with optional linear lr decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Per-parameter-vector optimizer state.

    decay_horizon > 0 anneals the learning rate linearly from lr to 0 over that
    many steps; the factor is computed from steps already completed, so the
    horizon-th step applies lr * (1 - (horizon-1)/horizon) and any step past
    the horizon applies zero.
    """

    lr: float
    size: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    decay_horizon: int = 0
    step: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.size < 1:
            raise ValueError(f"parameter count must be positive, got {self.size}")
        if self.decay_horizon < 0:
            raise ValueError(f"decay_horizon must be >= 0, got {self.decay_horizon}")
        self.m = np.zeros(self.size, dtype=np.float32)
        self.v = np.zeros(self.size, dtype=np.float32)

    def effective_lr(self) -> float:
        if self.decay_horizon <= 0:
            return self.lr
        return self.lr * max(0.0, 1.0 - self.step / self.decay_horizon)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update; returns new params and mutates state in place."""
    if params.shape != (state.size,) or grad.shape != (state.size,):
        raise ValueError(f"params/grad must have shape ({state.size},), got {params.shape}/{grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient passed to adam_step")
    lr = np.float32(state.effective_lr())
    state.step += 1
    g = grad.astype(np.float32, copy=False)
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    mhat = state.m / np.float32(1.0 - state.beta1**state.step)
    vhat = state.v / np.float32(1.0 - state.beta2**state.step)
    out = params - lr * mhat / (np.sqrt(vhat) + np.float32(state.eps))
    return out.astype(np.float32, copy=False)


def global_norm_clip(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    """Scale grad so its l2 norm is at most max_norm; returns (grad, pre-clip norm)."""
    norm = float(np.sqrt(np.sum(np.square(grad, dtype=np.float64))))
    if max_norm > 0.0 and norm > max_norm:
        grad = (grad * np.float32(max_norm / (norm + 1e-12))).astype(np.float32, copy=False)
    return grad, norm
