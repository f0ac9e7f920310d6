"""Two-player shared-reward environment interface.

Environments are pure state machines: step/observe take a state and return new
values, so arbitrarily many episodes can run concurrently on one instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    action_counts: tuple[int, int]
    action_names: tuple[str, ...]
    horizon: int
    gamma: float
    obs_shape: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if any(a < 2 for a in self.action_counts):
            raise ValueError(f"action counts must be >= 2, got {self.action_counts}")


@dataclass(frozen=True)
class StepResult:
    state: Any
    reward: float
    done: bool
    obs: tuple[np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        if not np.isfinite(self.reward):
            raise ValueError(f"non-finite reward {self.reward}")


@runtime_checkable
class Env(Protocol):
    spec: EnvSpec

    def reset(self, rng: np.random.Generator) -> tuple[Any, tuple[np.ndarray, np.ndarray]]: ...

    def step(self, state: Any, actions: tuple[int, int]) -> StepResult: ...

    def observe(self, state: Any, player: int) -> np.ndarray: ...
