"""Policy and value-function wrappers over flat-parameter nets.

A Policy maps a batch of observations to (actions, log-probs); rollout workers
hand each row its own rng stream so results never depend on batching order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from convpool.nn import ApproximatorSpec, forward, init_params
from convpool.nn.dist import log_softmax, sample_logits_batch


@dataclass
class Net:
    """A parameterized approximator (actor or critic)."""

    spec: ApproximatorSpec
    params: np.ndarray

    @classmethod
    def init(cls, spec: ApproximatorSpec, rng: np.random.Generator) -> "Net":
        return cls(spec, init_params(spec, rng))

    def copy(self) -> "Net":
        return Net(self.spec, self.params.copy())


@runtime_checkable
class Policy(Protocol):
    def act(
        self, obs: np.ndarray, rngs: Sequence[np.random.Generator]
    ) -> tuple[np.ndarray, np.ndarray]: ...


class NetPolicy:
    """Samples from the categorical head of an actor net."""

    def __init__(self, net: Net, greedy: bool = False):
        self.net = net
        self.greedy = greedy

    def act(self, obs: np.ndarray, rngs: Sequence[np.random.Generator]) -> tuple[np.ndarray, np.ndarray]:
        logits = forward(self.net.spec, self.net.params, obs)
        logp = log_softmax(logits)
        if self.greedy:
            actions = np.argmax(logits, axis=-1)
        else:
            actions = sample_logits_batch(logits, list(rngs))
        return actions, logp[np.arange(len(actions)), actions]


class ScriptedPolicy:
    """Deterministic observation -> action rule; log-prob 0 by convention."""

    def __init__(self, fn: Callable[[np.ndarray], int]):
        self.fn = fn

    def act(self, obs: np.ndarray, rngs: Sequence[np.random.Generator]) -> tuple[np.ndarray, np.ndarray]:
        actions = np.array([self.fn(o) for o in obs], dtype=np.int64)
        return actions, np.zeros(len(actions), dtype=np.float32)


def value_batch(net: Net, obs: np.ndarray) -> np.ndarray:
    """Critic forward squeezed to a value per row."""
    out = forward(net.spec, net.params, obs)
    return out[..., 0]
