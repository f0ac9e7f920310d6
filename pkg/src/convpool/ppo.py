"""PPO updates with the three-buffer convention loss and the per-pair critic bank.

One update = ppo_epochs passes over the self-play, cross-play, and mixed-play
buffers. Cross-play samples enter the clipped surrogate with their advantages
negated and weight alpha (training against compatibility); mixed-play samples
enter like self-play with weight beta. Buffers whose weight is zero are
ignored entirely, which makes the alpha=beta=0 path bit-identical to plain
self-play PPO.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from convpool.agents import Net
from convpool.nn import ApproximatorSpec, forward, forward_backward, global_norm_clip
from convpool.nn.dist import kl_divergence, log_softmax, softmax
from convpool.nn.optim import AdamState, adam_step
from convpool.rollout import TrajectoryBuffer


@dataclass(frozen=True)
class PPOConfig:
    clip_ratio: float = 0.2
    ppo_epochs: int = 15
    minibatches: int = 1
    entropy_coef: float = 0.01
    value_loss_coef: float = 0.5
    max_grad_norm: float = 0.5
    alpha: float = 0.5
    beta: float = 1.0
    adap_weight: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError(f"clip_ratio must be in (0,1), got {self.clip_ratio}")
        if self.ppo_epochs < 1:
            raise ValueError(f"ppo_epochs must be >= 1, got {self.ppo_epochs}")
        if self.minibatches < 1:
            raise ValueError(f"minibatches must be >= 1, got {self.minibatches}")
        if self.alpha < 0 or self.beta < 0 or self.adap_weight < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class CriticBank:
    """n self-play critics plus n^2-n ordered-pair cross-play critics."""

    spec: ApproximatorSpec
    self_critics: dict[int, Net] = field(default_factory=dict)
    cross_critics: dict[tuple[int, int], Net] = field(default_factory=dict)

    def add_convention(self, conv_id: int, rng: np.random.Generator) -> None:
        if conv_id in self.self_critics:
            raise ValueError(f"critic for convention {conv_id} already present")
        self.self_critics[conv_id] = Net.init(self.spec, rng)
        for other in self.self_critics:
            if other != conv_id:
                self.cross_critics[(conv_id, other)] = Net.init(self.spec, rng)
                self.cross_critics[(other, conv_id)] = Net.init(self.spec, rng)

    def validate(self) -> None:
        n = len(self.self_critics)
        if len(self.cross_critics) != n * n - n:
            raise ValueError(
                f"critic bank inconsistent: {n} self critics need {n * n - n} "
                f"cross critics, found {len(self.cross_critics)}"
            )


def ppo_actor_loss(
    buffer: TrajectoryBuffer,
    actor: Net,
    cfg: PPOConfig,
    idx: np.ndarray | None = None,
    negate_advantages: bool = False,
) -> tuple[float, np.ndarray, dict]:
    """Clipped-surrogate loss and its parameter gradient over trainee samples."""
    if buffer.advantages is None:
        raise ValueError("advantages not computed; run compute_gae first")
    if idx is None:
        idx = np.flatnonzero(buffer.trainee)
    if len(idx) == 0:
        raise ValueError("empty buffer slice in ppo_actor_loss")
    obs = buffer.obs[idx]
    actions = buffer.actions[idx]
    old_logp = buffer.logps[idx].astype(np.float64)
    adv = buffer.advantages[idx]
    if negate_advantages:
        adv = -adv

    logits = forward(actor.spec, actor.params, obs)
    logp_all = log_softmax(logits)
    p = np.exp(logp_all)
    n, k = logits.shape
    rows = np.arange(n)
    logp = logp_all[rows, actions].astype(np.float64)
    ratio = np.exp(logp - old_logp)
    eps = cfg.clip_ratio
    surr = np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)
    entropy = -np.sum(p * logp_all, axis=-1)
    loss = float(-surr.mean() - cfg.entropy_coef * entropy.mean())

    # clip saturation kills the gradient for that sample
    saturated = ((adv > 0) & (ratio > 1 + eps)) | ((adv < 0) & (ratio < 1 - eps))
    coef = np.where(saturated, 0.0, -ratio * adv) / n
    dlogits = coef[:, None] * (-p)
    dlogits[rows, actions] += coef
    if cfg.entropy_coef != 0.0:
        dlogits += cfg.entropy_coef * p * (logp_all + entropy[:, None]) / n
    _, grad = forward_backward(actor.spec, actor.params, obs, dlogits.astype(np.float32))

    stats = {
        "approx_kl": float(np.mean(old_logp - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > eps)),
        "entropy": float(entropy.mean()),
    }
    return loss, grad, stats


def critic_loss(
    critic: Net, obs: np.ndarray, returns: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean squared error between value predictions and returns, with gradient."""
    if len(obs) == 0:
        raise ValueError("empty buffer slice in critic_loss")
    v = forward(critic.spec, critic.params, obs)[:, 0].astype(np.float64)
    err = v - returns
    loss = float(np.mean(err * err))
    dv = (2.0 * err / len(err)).astype(np.float32)[:, None]
    _, grad = forward_backward(critic.spec, critic.params, obs, dv)
    return loss, grad


@dataclass
class TrainNets:
    """Everything comedi_update mutates for one convention's training."""

    actor: Net
    actor_opt: AdamState
    self_critic: Net
    self_opt: AdamState
    # partner id -> ((trainee, partner) critic, opt); _rev is the reverse pair
    cross: dict[int, tuple[Net, AdamState]] = field(default_factory=dict)
    cross_rev: dict[int, tuple[Net, AdamState]] = field(default_factory=dict)


def _shards(rng: np.random.Generator, idx: np.ndarray, count: int) -> list[np.ndarray]:
    perm = rng.permutation(idx)
    return [s for s in np.array_split(perm, count)]


def _apply(net: Net, opt: AdamState, grad: np.ndarray, max_norm: float) -> float:
    grad, norm = global_norm_clip(grad, max_norm)
    net.params = adam_step(net.params, grad, opt)
    return norm


def comedi_update(
    nets: TrainNets,
    sp_buffer: TrajectoryBuffer,
    xp_buffer: TrajectoryBuffer | None,
    mp_buffer: TrajectoryBuffer | None,
    cfg: PPOConfig,
    rng: np.random.Generator,
) -> dict:
    """Run ppo_epochs of minibatch updates over the convention loss."""
    if cfg.alpha > 0 and xp_buffer is None:
        raise ValueError("alpha > 0 requires a cross-play buffer")
    if cfg.beta > 0 and mp_buffer is None:
        raise ValueError("beta > 0 requires a mixed-play buffer")
    use_xp = cfg.alpha > 0
    use_mp = cfg.beta > 0
    if use_xp and xp_buffer.partner not in nets.cross:
        raise ValueError(f"no cross critic for partner {xp_buffer.partner!r}")

    stats: dict[str, float] = {}
    sp_idx = np.flatnonzero(sp_buffer.trainee)
    xp_idx = np.flatnonzero(xp_buffer.trainee) if use_xp else None
    xp_partner_idx = np.flatnonzero(~xp_buffer.trainee) if use_xp else None
    mp_idx = np.flatnonzero(mp_buffer.trainee) if use_mp else None

    for _ in range(cfg.ppo_epochs):
        sp_shards = _shards(rng, sp_idx, cfg.minibatches)
        xp_shards = _shards(rng, xp_idx, cfg.minibatches) if use_xp else None
        xpp_shards = _shards(rng, xp_partner_idx, cfg.minibatches) if use_xp else None
        mp_shards = _shards(rng, mp_idx, cfg.minibatches) if use_mp else None

        for m in range(cfg.minibatches):
            if len(sp_shards[m]) == 0:
                continue
            loss, grad, st = ppo_actor_loss(sp_buffer, nets.actor, cfg, sp_shards[m])
            if use_xp and len(xp_shards[m]):
                _, g_xp, _ = ppo_actor_loss(
                    xp_buffer, nets.actor, cfg, xp_shards[m], negate_advantages=True
                )
                grad = grad + np.float32(cfg.alpha) * g_xp
            if use_mp and len(mp_shards[m]):
                _, g_mp, _ = ppo_actor_loss(mp_buffer, nets.actor, cfg, mp_shards[m])
                grad = grad + np.float32(cfg.beta) * g_mp
            norm = _apply(nets.actor, nets.actor_opt, grad, cfg.max_grad_norm)
            stats = {"actor_loss": loss, "grad_norm": norm, **st}

            vobs = sp_buffer.obs[sp_shards[m]]
            vret = sp_buffer.returns[sp_shards[m]]
            if use_mp and len(mp_shards[m]):
                vobs = np.concatenate([vobs, mp_buffer.obs[mp_shards[m]]])
                vret = np.concatenate([vret, mp_buffer.returns[mp_shards[m]]])
            vloss, vgrad = critic_loss(nets.self_critic, vobs, vret)
            _apply(nets.self_critic, nets.self_opt, np.float32(cfg.value_loss_coef) * vgrad, cfg.max_grad_norm)
            stats["value_loss"] = vloss

            if use_xp:
                critic, opt = nets.cross[xp_buffer.partner]
                if len(xp_shards[m]):
                    xloss, xgrad = critic_loss(
                        critic, xp_buffer.obs[xp_shards[m]], xp_buffer.returns[xp_shards[m]]
                    )
                    _apply(critic, opt, np.float32(cfg.value_loss_coef) * xgrad, cfg.max_grad_norm)
                    stats["xp_value_loss"] = xloss
                rev = nets.cross_rev.get(xp_buffer.partner)
                if rev is not None and len(xpp_shards[m]):
                    rcritic, ropt = rev
                    _, rgrad = critic_loss(
                        rcritic, xp_buffer.obs[xpp_shards[m]], xp_buffer.returns[xpp_shards[m]]
                    )
                    _apply(rcritic, ropt, np.float32(cfg.value_loss_coef) * rgrad, cfg.max_grad_norm)
    return stats


def adap_regularizer(actors: list[Net], obs: np.ndarray) -> float:
    """Mean over ordered distinct actor pairs and states of exp(-KL(pi_i || pi_j))."""
    if len(actors) < 2:
        raise ValueError("adap regularizer needs at least 2 actors")
    logits = [forward(a.spec, a.params, obs) for a in actors]
    total, pairs = 0.0, 0
    for i in range(len(actors)):
        for j in range(len(actors)):
            if i == j:
                continue
            kl = kl_divergence(logits[i], logits[j])
            total += float(np.mean(np.exp(-kl)))
            pairs += 1
    return total / pairs


def adap_gradients(actors: list[Net], obs: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Penalty and its gradient w.r.t. each actor's parameters.

    d/da_k KL(p||q) = p_k ((log p_k - log q_k) - KL); d/db_k = q_k - p_k;
    the exp(-KL) factor chains through both.
    """
    if len(actors) < 2:
        raise ValueError("adap regularizer needs at least 2 actors")
    n_states = len(obs)
    logits = [forward(a.spec, a.params, obs) for a in actors]
    logps = [log_softmax(z) for z in logits]
    ps = [np.exp(lp) for lp in logps]
    n = len(actors)
    pairs = n * n - n
    dlogits = [np.zeros_like(z, dtype=np.float64) for z in logits]
    penalty = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            diff = logps[i] - logps[j]
            kl = np.sum(ps[i] * diff, axis=-1)
            w = np.exp(-kl) / (pairs * n_states)
            penalty += float(np.sum(w))
            dkl_di = ps[i] * (diff - kl[:, None])
            dkl_dj = ps[j] - ps[i]
            dlogits[i] += -w[:, None] * dkl_di
            dlogits[j] += -w[:, None] * dkl_dj
    grads = []
    for a, dz in zip(actors, dlogits):
        _, g = forward_backward(a.spec, a.params, obs, dz.astype(np.float32))
        grads.append(g)
    return penalty, grads


def selfplay_update(
    nets: TrainNets, sp_buffer: TrajectoryBuffer, cfg: PPOConfig, rng: np.random.Generator
) -> dict:
    """Plain self-play PPO: the convention loss with both extra weights at zero."""
    zeroed = PPOConfig(
        clip_ratio=cfg.clip_ratio,
        ppo_epochs=cfg.ppo_epochs,
        minibatches=cfg.minibatches,
        entropy_coef=cfg.entropy_coef,
        value_loss_coef=cfg.value_loss_coef,
        max_grad_norm=cfg.max_grad_norm,
        alpha=0.0,
        beta=0.0,
    )
    return comedi_update(nets, sp_buffer, None, None, zeroed, rng)
