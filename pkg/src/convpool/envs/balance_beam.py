"""Balance Beam: two players on a 5-cell line coordinate to co-locate.

Each of the 2 steps both players simultaneously move 1 or 2 cells left or
right (no staying still). Stepping off either end ends the episode with reward
-(remaining timesteps); otherwise the step pays -d/5 for the new distance d
plus +1 when co-located. Best return 2.0, worst -2.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from convpool.envs.base import EnvSpec, StepResult

DELTAS = (-2, -1, 1, 2)
ACTION_NAMES = ("left2", "left1", "right1", "right2")
N_CELLS = 5
HORIZON = 2


@dataclass(frozen=True)
class BalanceBeamState:
    positions: tuple[int | None, int | None]  # None = off the line
    step: int
    terminated: bool


class BalanceBeam:
    def __init__(self, gamma: float = 0.99):
        self.spec = EnvSpec(
            name="balance_beam",
            action_counts=(4, 4),
            action_names=ACTION_NAMES,
            horizon=HORIZON,
            gamma=gamma,
            obs_shape=(2 * N_CELLS + HORIZON + 1,),
        )

    def reset(self, rng: np.random.Generator) -> tuple[BalanceBeamState, tuple[np.ndarray, np.ndarray]]:
        p = (int(rng.integers(N_CELLS)), int(rng.integers(N_CELLS)))
        state = BalanceBeamState(p, 0, False)
        return state, (self.observe(state, 0), self.observe(state, 1))

    def step(self, state: BalanceBeamState, actions: tuple[int, int]) -> StepResult:
        if state.terminated or state.step >= HORIZON:
            raise ValueError("step on terminal state")
        if any(not 0 <= a < 4 for a in actions):
            raise ValueError(f"actions must be in [0, 4), got {actions}")
        new = [state.positions[i] + DELTAS[actions[i]] for i in range(2)]
        fell = [not 0 <= q < N_CELLS for q in new]
        if any(fell):
            reward = -float(HORIZON - state.step)
            positions = tuple(None if fell[i] else new[i] for i in range(2))
            nxt = BalanceBeamState(positions, state.step + 1, True)
            return StepResult(nxt, reward, True, (self.observe(nxt, 0), self.observe(nxt, 1)))
        d = abs(new[0] - new[1])
        reward = -d / 5.0 + (1.0 if d == 0 else 0.0)
        nxt = BalanceBeamState((new[0], new[1]), state.step + 1, state.step + 1 >= HORIZON)
        return StepResult(nxt, reward, nxt.terminated, (self.observe(nxt, 0), self.observe(nxt, 1)))

    def observe(self, state: BalanceBeamState, player: int) -> np.ndarray:
        obs = np.zeros(2 * N_CELLS + HORIZON + 1, dtype=np.float32)
        own, other = state.positions[player], state.positions[1 - player]
        if own is not None:
            obs[own] = 1.0
        if other is not None:
            obs[N_CELLS + other] = 1.0
        if state.step < HORIZON:
            obs[2 * N_CELLS + state.step] = 1.0
        obs[-1] = float(player)
        return obs
