"""Blind Bandits: a k-step two-player game with two incompatible winning paths.

Both players pick L or R each step and see only their own history. The safe
path pays S_val (player 1 opens with L and player 2 closes with L, all other
actions free). The greedy path pays G_val and is unique: player 1 opens with R,
player 2 closes with R, and every other action by either player is L. Any
other joint trajectory scores 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from convpool.envs.base import EnvSpec, StepResult

L, R = 0, 1
ACTION_NAMES = ("L", "R")


@dataclass(frozen=True)
class BlindBanditsState:
    histories: tuple[tuple[int, ...], tuple[int, ...]]
    s_val: float
    g_val: float

    @property
    def step(self) -> int:
        return len(self.histories[0])


class BlindBandits:
    def __init__(self, k: int = 3, s_val: float = 2.0, g_val: float = 3.0):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not g_val > s_val > 0:
            raise ValueError(f"need G_val > S_val > 0, got S={s_val}, G={g_val}")
        self.k = k
        self.s_val = float(s_val)
        self.g_val = float(g_val)
        # 3 slots per own step (none/L/R) plus a player-index bit
        self.spec = EnvSpec(
            name="blind_bandits",
            action_counts=(2, 2),
            action_names=ACTION_NAMES,
            horizon=k,
            gamma=1.0,
            obs_shape=(3 * k + 1,),
        )

    def reset(self, rng: np.random.Generator) -> tuple[BlindBanditsState, tuple[np.ndarray, np.ndarray]]:
        state = BlindBanditsState(((), ()), self.s_val, self.g_val)
        return state, (self.observe(state, 0), self.observe(state, 1))

    def _score(self, h1: tuple[int, ...], h2: tuple[int, ...]) -> float:
        if h1[0] == L and h2[-1] == L:
            return self.s_val
        greedy = (
            h1[0] == R
            and all(a == L for a in h1[1:])
            and h2[-1] == R
            and all(a == L for a in h2[:-1])
        )
        return self.g_val if greedy else 0.0

    def step(self, state: BlindBanditsState, actions: tuple[int, int]) -> StepResult:
        if state.step >= self.k:
            raise ValueError("step on terminal state")
        if any(a not in (L, R) for a in actions):
            raise ValueError(f"actions must be in {{0 (L), 1 (R)}}, got {actions}")
        h1 = state.histories[0] + (actions[0],)
        h2 = state.histories[1] + (actions[1],)
        nxt = BlindBanditsState((h1, h2), self.s_val, self.g_val)
        done = nxt.step == self.k
        reward = self._score(h1, h2) if done else 0.0
        return StepResult(nxt, reward, done, (self.observe(nxt, 0), self.observe(nxt, 1)))

    def observe(self, state: BlindBanditsState, player: int) -> np.ndarray:
        # a player sees only its own action history
        obs = np.zeros(3 * self.k + 1, dtype=np.float32)
        hist = state.histories[player]
        for i in range(self.k):
            if i < len(hist):
                obs[3 * i + 1 + hist[i]] = 1.0
            else:
                obs[3 * i] = 1.0
        obs[-1] = float(player)
        return obs
