"""Trajectory collection (self-play, cross-play, mixed-play) and GAE.

Every episode owns fresh rng streams derived from integer seeds drawn off the
caller's generator, so trajectories are bit-identical for any worker count
(workers here are lockstep episode slots batched through the nets, not OS
threads). Cross-play episodes come in pairs that share seeds with the two role
assignments, which makes the mean-return estimate exactly invariant under
swapping the actors.

Mixed-play episodes draw a phase split t uniformly from [1, T-1]; during the
first t steps each seat's controller is re-sampled uniformly from the two
actors every step and nothing is stored; from t on both seats run the trainee
and transitions are kept, with discounting restarted at t.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from convpool.agents import Net, Policy, value_batch
from convpool.envs.base import Env

SELFPLAY = "selfplay"
CROSSPLAY = "crossplay"
MIXEDPLAY = "mixedplay"


@dataclass(frozen=True)
class GAEConfig:
    gamma: float
    lam: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass
class TrajectoryBuffer:
    """Flat per-seat transition arrays in (episode, seat, time) order.

    `stream` numbers contiguous (episode, seat) runs; `trainee` marks samples
    whose seat was controlled by the policy being optimized. Advantages and
    returns appear after compute_gae.
    """

    mode: str
    partner: int | str | None
    obs: np.ndarray
    actions: np.ndarray
    logps: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    has_values: np.ndarray
    trainee: np.ndarray
    stream: np.ndarray
    episode_returns: np.ndarray
    env_steps: int
    phase_splits: np.ndarray | None = None
    advantages: np.ndarray | None = None
    raw_advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __post_init__(self) -> None:
        if np.any(self.logps > 1e-6):
            raise ValueError("log-probabilities must be <= 0")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("non-finite reward in buffer")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def n_transitions(self) -> int:
        """Stored env steps (each contributes one sample per seat)."""
        return len(self.actions) // 2

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.episode_returns))


@dataclass
class _SeatAccum:
    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logps: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    values: list = field(default_factory=list)


@dataclass
class _Plan:
    env_seed: int
    seat_seeds: tuple[int, int]
    # seat controllers during the recorded phase (constant for self/cross play)
    controllers: tuple[str, str]
    mixed: bool
    critic_keys: tuple[str | None, str | None]
    trainee: tuple[bool, bool]
    # policies the per-step uniform draw picks from during a mixed phase 1
    mixture: tuple[str, str] | None = None


@dataclass
class _Slot:
    ep: int
    plan: _Plan
    state: object
    obs: tuple[np.ndarray, np.ndarray]
    seat_rngs: tuple[np.random.Generator, np.random.Generator]
    step: int = 0
    record_from: int = 0
    phase1_choices: np.ndarray | None = None
    ret: float = 0.0


SplitSampler = Callable[[np.random.Generator, int], int]


def _default_split(rng: np.random.Generator, horizon: int) -> int:
    return int(rng.integers(1, horizon))


def _seat_controller(slot: _Slot) -> tuple[str, str]:
    if not slot.plan.mixed or slot.step >= slot.record_from:
        return slot.plan.controllers
    pick = slot.phase1_choices[slot.step]
    mix = slot.plan.mixture
    return (mix[pick[0]], mix[pick[1]])


def _run_plans(
    env: Env,
    plans: list[_Plan],
    policies: dict[str, Policy],
    critics: dict[str, Net],
    workers: int,
    split_sampler: SplitSampler | None,
) -> tuple[dict, np.ndarray, int, np.ndarray | None]:
    horizon = env.spec.horizon
    sampler = split_sampler or _default_split
    queue = deque(enumerate(plans))
    slots: list[_Slot | None] = [None] * max(1, workers)
    accums: dict[tuple[int, int], _SeatAccum] = {}
    episode_returns = np.zeros(len(plans))
    splits = np.zeros(len(plans), dtype=np.int64) if (plans and plans[0].mixed) else None
    env_steps = 0

    def start(i: int) -> None:
        if not queue:
            slots[i] = None
            return
        ep, plan = queue.popleft()
        rng_env = np.random.default_rng(plan.env_seed)
        state, obs = env.reset(rng_env)
        slot = _Slot(
            ep=ep,
            plan=plan,
            state=state,
            obs=obs,
            seat_rngs=(np.random.default_rng(plan.seat_seeds[0]), np.random.default_rng(plan.seat_seeds[1])),
        )
        if plan.mixed:
            t = sampler(rng_env, horizon)
            if not 1 <= t < horizon:
                raise ValueError(f"phase split {t} outside [1, {horizon - 1}]")
            slot.record_from = t
            slot.phase1_choices = rng_env.integers(2, size=(t, 2))
            splits[ep] = t
        for seat in (0, 1):
            accums[(ep, seat)] = _SeatAccum()
        slots[i] = slot

    for i in range(len(slots)):
        start(i)

    while any(s is not None for s in slots):
        live = [s for s in slots if s is not None]
        # batch action sampling by controlling policy
        groups: dict[str, list[tuple[_Slot, int]]] = {}
        for s in live:
            c = _seat_controller(s)
            for seat in (0, 1):
                groups.setdefault(c[seat], []).append((s, seat))
        actions: dict[tuple[int, int], tuple[int, float]] = {}
        for key, members in groups.items():
            obs = np.stack([s.obs[seat] for s, seat in members])
            rngs = [s.seat_rngs[seat] for s, seat in members]
            acts, logps = policies[key].act(obs, rngs)
            for (s, seat), a, lp in zip(members, acts, logps):
                actions[(s.ep, seat)] = (int(a), float(lp))

        # batch value estimates for recorded seats by critic
        vgroups: dict[str, list[tuple[_Slot, int]]] = {}
        for s in live:
            if s.step < s.record_from:
                continue
            for seat in (0, 1):
                ck = s.plan.critic_keys[seat]
                if ck is not None:
                    vgroups.setdefault(ck, []).append((s, seat))
        values: dict[tuple[int, int], float] = {}
        for key, members in vgroups.items():
            obs = np.stack([s.obs[seat] for s, seat in members])
            vals = value_batch(critics[key], obs)
            for (s, seat), v in zip(members, vals):
                values[(s.ep, seat)] = float(v)

        for i, s in enumerate(slots):
            if s is None:
                continue
            joint = (actions[(s.ep, 0)][0], actions[(s.ep, 1)][0])
            res = env.step(s.state, joint)
            env_steps += 1
            if s.step >= s.record_from:
                s.ret += res.reward
                for seat in (0, 1):
                    acc = accums[(s.ep, seat)]
                    acc.obs.append(s.obs[seat])
                    a, lp = actions[(s.ep, seat)]
                    acc.actions.append(a)
                    acc.logps.append(lp)
                    acc.rewards.append(res.reward)
                    acc.dones.append(res.done)
                    acc.values.append(values.get((s.ep, seat), np.nan))
            s.state, s.obs, s.step = res.state, res.obs, s.step + 1
            if res.done:
                episode_returns[s.ep] = s.ret
                start(i)

    return accums, episode_returns, env_steps, splits


def _build_buffer(
    mode: str,
    partner: int | str | None,
    plans: list[_Plan],
    accums: dict,
    episode_returns: np.ndarray,
    env_steps: int,
    splits: np.ndarray | None,
) -> TrajectoryBuffer:
    obs, acts, logps, rews, dones, vals, trainee, stream = [], [], [], [], [], [], [], []
    sid = 0
    for ep, plan in enumerate(plans):
        for seat in (0, 1):
            acc = accums[(ep, seat)]
            n = len(acc.actions)
            if n == 0:
                continue
            obs.append(np.stack(acc.obs))
            acts.append(np.asarray(acc.actions, dtype=np.int64))
            logps.append(np.asarray(acc.logps, dtype=np.float32))
            rews.append(np.asarray(acc.rewards, dtype=np.float64))
            dones.append(np.asarray(acc.dones, dtype=bool))
            vals.append(np.asarray(acc.values, dtype=np.float64))
            trainee.append(np.full(n, plan.trainee[seat]))
            stream.append(np.full(n, sid, dtype=np.int64))
            sid += 1
    values = np.concatenate(vals)
    return TrajectoryBuffer(
        mode=mode,
        partner=partner,
        obs=np.concatenate(obs),
        actions=np.concatenate(acts),
        logps=np.concatenate(logps),
        rewards=np.concatenate(rews),
        dones=np.concatenate(dones),
        values=np.nan_to_num(values),
        has_values=~np.isnan(values),
        trainee=np.concatenate(trainee),
        stream=np.concatenate(stream),
        episode_returns=episode_returns,
        env_steps=env_steps,
        phase_splits=splits,
    )


def _draw_seeds(rng: np.random.Generator, n: int) -> list[int]:
    return [int(x) for x in rng.integers(0, 2**63, size=n)]


def collect_selfplay(
    actor: Policy,
    critic: Net | None,
    env: Env,
    episodes: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> TrajectoryBuffer:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    ck = "self" if critic is not None else None
    plans = []
    for _ in range(episodes):
        e, s0, s1 = _draw_seeds(rng, 3)
        plans.append(_Plan(e, (s0, s1), ("actor", "actor"), False, (ck, ck), (True, True)))
    out = _run_plans(env, plans, {"actor": actor}, {"self": critic} if critic else {}, workers, None)
    return _build_buffer(SELFPLAY, None, plans, *out)


def collect_crossplay(
    actor_a: Policy,
    actor_b: Policy,
    cross_critic: Net | None,
    env: Env,
    episodes: int,
    rng: np.random.Generator,
    workers: int = 1,
    partner: int | str | None = None,
) -> TrajectoryBuffer:
    """Paired role alternation: episodes 2e and 2e+1 share seeds with actor_a
    on seat 0 and seat 1 respectively; the first actor is the trainee."""
    if episodes < 2 or episodes % 2 != 0:
        raise ValueError("cross-play needs an even episode count >= 2")
    ck = "cross" if cross_critic is not None else None
    plans = []
    for _ in range(episodes // 2):
        e, s0, s1 = _draw_seeds(rng, 3)
        plans.append(_Plan(e, (s0, s1), ("a", "b"), False, (ck, None), (True, False)))
        plans.append(_Plan(e, (s0, s1), ("b", "a"), False, (None, ck), (False, True)))
    out = _run_plans(
        env, plans, {"a": actor_a, "b": actor_b}, {"cross": cross_critic} if cross_critic else {}, workers, None
    )
    return _build_buffer(CROSSPLAY, partner, plans, *out)


def collect_mixedplay(
    actor_n: Policy,
    actor_star: Policy,
    env: Env,
    episodes: int,
    rng: np.random.Generator,
    critic: Net | None = None,
    workers: int = 1,
    split_sampler: SplitSampler | None = None,
    partner: int | str | None = None,
) -> TrajectoryBuffer:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if env.spec.horizon < 2:
        raise ValueError("mixed play needs horizon >= 2 for a non-empty phase 2")
    ck = "self" if critic is not None else None
    plans = []
    for _ in range(episodes):
        e, s0, s1 = _draw_seeds(rng, 3)
        plans.append(
            _Plan(e, (s0, s1), ("n", "n"), True, (ck, ck), (True, True), mixture=("n", "star"))
        )
    out = _run_plans(
        env,
        plans,
        {"n": actor_n, "star": actor_star},
        {"self": critic} if critic else {},
        workers,
        split_sampler,
    )
    return _build_buffer(MIXEDPLAY, partner, plans, *out)


def _stream_slices(stream: np.ndarray) -> list[slice]:
    bounds = np.flatnonzero(np.diff(stream)) + 1
    edges = [0, *bounds.tolist(), len(stream)]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def compute_gae(
    buffer: TrajectoryBuffer, cfg: GAEConfig, values: np.ndarray | None = None
) -> TrajectoryBuffer:
    """Fill advantages/returns; advantages are normalized over trainee samples.

    Streams without value estimates (cross-play partner seats) get plain
    discounted reward-to-go returns and zero advantages; they only ever feed
    critic regression. Trainee streams must carry values.
    """
    if values is not None:
        if values.shape != buffer.values.shape:
            raise ValueError("values shape mismatch")
        buffer.values = np.asarray(values, dtype=np.float64)
        buffer.has_values = np.ones(len(buffer), dtype=bool)
    adv = np.zeros(len(buffer))
    ret = np.zeros(len(buffer))
    for sl in _stream_slices(buffer.stream):
        r = buffer.rewards[sl]
        if buffer.has_values[sl].all():
            v = buffer.values[sl]
            nxt_v = np.append(v[1:], 0.0)  # terminal bootstrap 0
            delta = r + cfg.gamma * nxt_v - v
            a = np.zeros(len(r))
            acc = 0.0
            for t in range(len(r) - 1, -1, -1):
                acc = delta[t] + cfg.gamma * cfg.lam * acc
                a[t] = acc
            adv[sl] = a
            ret[sl] = a + v
        else:
            if buffer.trainee[sl].any():
                raise ValueError("missing value estimates on a trainee stream")
            acc = 0.0
            g = np.zeros(len(r))
            for t in range(len(r) - 1, -1, -1):
                acc = r[t] + cfg.gamma * acc
                g[t] = acc
            ret[sl] = g
    adv[~buffer.trainee] = 0.0
    buffer.raw_advantages = adv.copy()
    mask = buffer.trainee
    if mask.sum() > 1:
        mu = adv[mask].mean()
        sigma = adv[mask].std()
        adv[mask] = (adv[mask] - mu) / (sigma + 1e-8)
    buffer.advantages = adv
    buffer.returns = ret
    return buffer
