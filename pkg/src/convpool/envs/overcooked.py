"""Simplified two-chef Overcooked gridworld.

Single recipe: three onions in a pot, cook for cook_time steps, collect with a
dish, deliver the soup at a serving window for +1 shared reward. Movement is
simultaneous; two players can never share a tile (same-target and swap moves
both block). Interacts resolve before movement in player order, using
pre-move positions and orientations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from convpool.envs.base import EnvSpec, StepResult
from convpool.envs.layouts import COUNTER, DISH_SOURCE, FLOOR, Layout, ONION_SOURCE, POT, SERVE, load_layout

# held items
NONE, ONION, DISH, SOUP = 0, 1, 2, 3
HELD_NAMES = ("none", "onion", "dish", "soup")

# actions
UP, DOWN, LEFT, RIGHT, STAY, INTERACT = range(6)
ACTION_NAMES = ("up", "down", "left", "right", "stay", "interact")
# orientations share indices with the four move actions
ORIENT_VECS = ((-1, 0), (1, 0), (0, -1), (0, 1))
ORIENT_NAMES = ("up", "down", "left", "right")

N_CHANNELS = 30
MAX_ONIONS = 3


@dataclass(frozen=True)
class OvercookedState:
    players: tuple[tuple[int, int], tuple[int, int]]
    orients: tuple[int, int]
    held: tuple[int, int]
    pots: tuple[tuple[tuple[int, int], int, int], ...]  # (pos, onions, timer), fixed order
    counters: tuple[tuple[tuple[int, int], int], ...]  # (pos, item), sorted by pos
    step: int
    delivered: int


class Overcooked:
    def __init__(
        self,
        layout: str | Layout = "cramped_room",
        horizon: int = 200,
        cook_time: int = 20,
        shaped_rewards: bool = False,
        gamma: float = 0.99,
    ):
        self.layout = layout if isinstance(layout, Layout) else load_layout(layout)
        if horizon < 1 or cook_time < 1:
            raise ValueError("horizon and cook_time must be >= 1")
        self.horizon = horizon
        self.cook_time = cook_time
        self.shaped_rewards = shaped_rewards
        self.spec = EnvSpec(
            name="overcooked",
            action_counts=(6, 6),
            action_names=ACTION_NAMES,
            horizon=horizon,
            gamma=gamma,
            obs_shape=(N_CHANNELS, self.layout.height, self.layout.width),
        )

    def reset(self, rng: np.random.Generator) -> tuple[OvercookedState, tuple[np.ndarray, np.ndarray]]:
        pots = tuple((pos, 0, 0) for pos in self.layout.pot_positions())
        state = OvercookedState(
            players=self.layout.spawns,
            orients=(DOWN, DOWN),
            held=(NONE, NONE),
            pots=pots,
            counters=(),
            step=0,
            delivered=0,
        )
        return state, (self.observe(state, 0), self.observe(state, 1))

    def step(self, state: OvercookedState, actions: tuple[int, int]) -> StepResult:
        if state.step >= self.horizon:
            raise ValueError("step on terminal state")
        if any(not 0 <= a < 6 for a in actions):
            raise ValueError(f"actions must be in [0, 6), got {actions}")

        # cooking pots advance at the start of the step
        pots = {pos: (n, t - 1 if n == MAX_ONIONS and t > 0 else t) for pos, n, t in state.pots}
        counters = dict(state.counters)
        held = list(state.held)
        delivered = state.delivered
        reward = 0.0

        # interactions, player order, pre-move positions and orientations
        for i in (0, 1):
            if actions[i] != INTERACT:
                continue
            dr, dc = ORIENT_VECS[state.orients[i]]
            face = (state.players[i][0] + dr, state.players[i][1] + dc)
            if not (0 <= face[0] < self.layout.height and 0 <= face[1] < self.layout.width):
                continue
            tile = self.layout.tile(face)
            if tile == ONION_SOURCE and held[i] == NONE:
                held[i] = ONION
            elif tile == DISH_SOURCE and held[i] == NONE:
                held[i] = DISH
            elif tile == POT:
                onions, timer = pots[face]
                if held[i] == ONION and onions < MAX_ONIONS:
                    onions += 1
                    timer = self.cook_time if onions == MAX_ONIONS else 0
                    pots[face] = (onions, timer)
                    held[i] = NONE
                    if self.shaped_rewards:
                        reward += 0.1
                elif held[i] == DISH and onions == MAX_ONIONS and timer == 0:
                    pots[face] = (0, 0)
                    held[i] = SOUP
                    if self.shaped_rewards:
                        reward += 0.1
            elif tile == SERVE and held[i] == SOUP:
                held[i] = NONE
                delivered += 1
                reward += 1.0
            elif tile == COUNTER:
                item = counters.get(face)
                if held[i] != NONE and item is None:
                    counters[face] = held[i]
                    held[i] = NONE
                elif held[i] == NONE and item is not None:
                    held[i] = item
                    del counters[face]

        # simultaneous movement; same-target and swap proposals both block
        orients = list(state.orients)
        proposed = list(state.players)
        for i in (0, 1):
            if actions[i] < 4:
                orients[i] = actions[i]
                dr, dc = ORIENT_VECS[actions[i]]
                target = (state.players[i][0] + dr, state.players[i][1] + dc)
                if self.layout.is_floor(target):
                    proposed[i] = target
        if proposed[0] == proposed[1]:
            proposed = list(state.players)
        elif proposed[0] == state.players[1] and proposed[1] == state.players[0]:
            proposed = list(state.players)

        nxt = OvercookedState(
            players=(proposed[0], proposed[1]),
            orients=(orients[0], orients[1]),
            held=(held[0], held[1]),
            pots=tuple((pos, n, t) for pos, (n, t) in pots.items()),
            counters=tuple(sorted(counters.items())),
            step=state.step + 1,
            delivered=delivered,
        )
        done = nxt.step >= self.horizon
        return StepResult(nxt, reward, done, (self.observe(nxt, 0), self.observe(nxt, 1)))

    def observe(self, state: OvercookedState, player: int) -> np.ndarray:
        h, w = self.layout.height, self.layout.width
        obs = np.zeros((N_CHANNELS, h, w), dtype=np.float32)
        me, other = player, 1 - player
        obs[0][state.players[me]] = 1.0
        obs[1 + state.orients[me]][state.players[me]] = 1.0
        obs[5][state.players[other]] = 1.0
        obs[6 + state.orients[other]][state.players[other]] = 1.0
        for ch, tile in enumerate((COUNTER, ONION_SOURCE, DISH_SOURCE, POT, SERVE)):
            for r in range(h):
                for c in range(w):
                    if self.layout.grid[r][c] == tile:
                        obs[10 + ch, r, c] = 1.0
        for pos, onions, timer in state.pots:
            if onions > 0:
                obs[15 + onions - 1][pos] = 1.0
            if onions == MAX_ONIONS and timer == 0:
                obs[18][pos] = 1.0
            obs[19][pos] = timer / self.cook_time
        for pos, item in state.counters:
            obs[20 + item - 1][pos] = 1.0
        if state.held[me] != NONE:
            obs[23 + state.held[me] - 1][state.players[me]] = 1.0
        if state.held[other] != NONE:
            obs[26 + state.held[other] - 1][state.players[other]] = 1.0
        obs[29] = (self.horizon - state.step) / self.horizon
        return obs

    def decode(self, obs: np.ndarray) -> dict:
        """Invert observe(): recover player/pot/counter facts (test oracle aid)."""
        me = np.argwhere(obs[0] == 1.0)
        other = np.argwhere(obs[5] == 1.0)
        out = {
            "self_pos": tuple(me[0]) if len(me) else None,
            "other_pos": tuple(other[0]) if len(other) else None,
            "self_orient": None,
            "other_orient": None,
            "self_held": NONE,
            "other_held": NONE,
            "pots": {},
            "counters": {},
        }
        for o in range(4):
            if obs[1 + o].any():
                out["self_orient"] = o
            if obs[6 + o].any():
                out["other_orient"] = o
        for item in (ONION, DISH, SOUP):
            if out["self_pos"] is not None and obs[23 + item - 1][out["self_pos"]] == 1.0:
                out["self_held"] = item
            if out["other_pos"] is not None and obs[26 + item - 1][out["other_pos"]] == 1.0:
                out["other_held"] = item
        for pos in self.layout.pot_positions():
            onions = 0
            for c in range(MAX_ONIONS):
                if obs[15 + c][pos] == 1.0:
                    onions = c + 1
            timer = int(round(float(obs[19][pos]) * self.cook_time))
            out["pots"][pos] = (onions, timer)
        for r in range(self.layout.height):
            for c in range(self.layout.width):
                for item in (ONION, DISH, SOUP):
                    if obs[20 + item - 1][r, c] == 1.0:
                        out["counters"][(r, c)] = item
        return out

    def render_text(self, state: OvercookedState) -> str:
        """ASCII frame for the terminal play mode."""
        rows = [list(r) for r in self.layout.grid]
        for pos, item in state.counters:
            rows[pos[0]][pos[1]] = "?odz"[item]
        for i, glyph in ((0, "A"), (1, "B")):
            r, c = state.players[i]
            rows[r][c] = glyph
        lines = ["".join(r) for r in rows]
        pot_bits = ", ".join(
            f"pot{pos}: {n} onions" + (f" t={t}" if t else (" READY" if n == MAX_ONIONS else ""))
            for pos, n, t in state.pots
        )
        for i, glyph in ((0, "A"), (1, "B")):
            lines.append(
                f"{glyph}: facing {ORIENT_NAMES[state.orients[i]]}, holding {HELD_NAMES[state.held[i]]}"
            )
        lines.append(f"step {state.step}/{self.horizon}  delivered {state.delivered}  {pot_bits}")
        return "\n".join(lines)
