"""Trainer oracle tests: finite differences through the full PPO loss,
degenerate-weight bit-equivalence, and the regularizer's closed-form values."""

import math

import numpy as np
import pytest

from convpool.agents import Net
from convpool.nn import ApproximatorSpec, AdamState, forward, init_params, num_params, softmax
from convpool.ppo import (
    CriticBank,
    PPOConfig,
    TrainNets,
    adap_gradients,
    adap_regularizer,
    comedi_update,
    critic_loss,
    ppo_actor_loss,
    selfplay_update,
)
from convpool.rollout import GAEConfig, TrajectoryBuffer, compute_gae


def toy_buffer(rng, n=12, obs_dim=4, n_actions=3, advantages=None, actor=None):
    obs = rng.standard_normal((n, obs_dim)).astype(np.float32)
    actions = rng.integers(n_actions, size=n)
    if actor is not None:
        from convpool.nn.dist import log_softmax

        logits = forward(actor.spec, actor.params, obs)
        logps = log_softmax(logits)[np.arange(n), actions]
    else:
        logps = np.log(np.full(n, 1.0 / n_actions, dtype=np.float32))
    buf = TrajectoryBuffer(
        mode="selfplay",
        partner=None,
        obs=obs,
        actions=actions.astype(np.int64),
        logps=logps.astype(np.float32),
        rewards=rng.standard_normal(n),
        dones=np.zeros(n, dtype=bool),
        values=np.zeros(n),
        has_values=np.ones(n, dtype=bool),
        trainee=np.ones(n, dtype=bool),
        stream=np.arange(n, dtype=np.int64),
        episode_returns=np.zeros(1),
        env_steps=n,
    )
    buf.advantages = rng.standard_normal(n) if advantages is None else np.asarray(advantages, dtype=np.float64)
    buf.raw_advantages = buf.advantages.copy()
    buf.returns = rng.standard_normal(n)
    return buf


def actor_net(rng, obs_dim=4, n_actions=3, hidden=(6,)):
    spec = ApproximatorSpec(input_shape=(obs_dim,), hidden=hidden, output_dim=n_actions)
    return Net(spec, init_params(spec, rng))


def test_actor_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = actor_net(rng)
    net.params = net.params.astype(np.float64)
    buf = toy_buffer(rng, actor=net)
    # perturb old logps so ratios straddle the clip interval without sitting on it
    buf.logps = (buf.logps + rng.uniform(-0.3, 0.3, size=len(buf))).astype(np.float32)
    cfg = PPOConfig(entropy_coef=0.07)
    loss, grad, _ = ppo_actor_loss(buf, net, cfg)

    eps = 1e-6
    fd = np.zeros_like(net.params)
    for i in range(len(net.params)):
        for sign in (1.0, -1.0):
            p = net.params.copy()
            p[i] += sign * eps
            l, _, _ = ppo_actor_loss(buf, Net(net.spec, p), cfg)
            fd[i] += sign * l
    fd /= 2 * eps
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-5)
    assert np.max(np.abs(fd - grad) / denom) < 1e-3


def test_actor_loss_ratio_one_value():
    rng = np.random.default_rng(1)
    net = actor_net(rng)
    buf = toy_buffer(rng, actor=net)
    buf.advantages -= buf.advantages.mean()  # normalized: mean 0
    cfg = PPOConfig(entropy_coef=0.5)
    loss, _, stats = ppo_actor_loss(buf, net, cfg)
    # with ratio = 1 the surrogate is mean(A) = 0, leaving only the entropy term
    assert loss == pytest.approx(-0.5 * stats["entropy"], abs=1e-6)
    assert stats["clip_frac"] == 0.0


def test_actor_loss_clip_saturation_zeroes_gradient():
    rng = np.random.default_rng(2)
    net = actor_net(rng, obs_dim=2, n_actions=2, hidden=())
    buf = toy_buffer(rng, n=1, obs_dim=2, n_actions=2, advantages=[1.0], actor=net)
    # fake an old logp so the current ratio is 1 + 2*eps > 1 + eps
    eps = 0.2
    from convpool.nn.dist import log_softmax

    cur = log_softmax(forward(net.spec, net.params, buf.obs))[0, buf.actions[0]]
    buf.logps = np.array([cur - math.log(1 + 2 * eps)], dtype=np.float32)
    cfg = PPOConfig(clip_ratio=eps, entropy_coef=0.0)
    _, grad, stats = ppo_actor_loss(buf, net, cfg)
    assert np.all(grad == 0.0)
    assert stats["clip_frac"] == 1.0


def test_actor_update_moves_toward_positive_advantage():
    rng = np.random.default_rng(3)
    net = actor_net(rng, obs_dim=2, n_actions=2, hidden=())
    obs = np.ones((8, 2), dtype=np.float32)
    buf = toy_buffer(rng, n=8, obs_dim=2, n_actions=2, actor=net)
    buf.obs = obs
    buf.actions = np.array([0, 1] * 4, dtype=np.int64)
    from convpool.nn.dist import log_softmax

    buf.logps = log_softmax(forward(net.spec, net.params, obs))[np.arange(8), buf.actions].astype(np.float32)
    buf.advantages = np.where(buf.actions == 0, 1.0, -1.0)
    p_before = softmax(forward(net.spec, net.params, obs[0]))[0]
    _, grad, _ = ppo_actor_loss(buf, net, PPOConfig(entropy_coef=0.0))
    opt = AdamState(lr=0.05, size=len(net.params))
    from convpool.nn.optim import adam_step

    net.params = adam_step(net.params, grad, opt)
    p_after = softmax(forward(net.spec, net.params, obs[0]))[0]
    assert p_after > p_before


def test_crossplay_gradient_is_negated_selfplay_gradient():
    rng = np.random.default_rng(4)
    net = actor_net(rng)
    buf = toy_buffer(rng, actor=net)  # ratio 1: no saturation either way
    _, g_sp, _ = ppo_actor_loss(buf, net, PPOConfig(entropy_coef=0.0))
    _, g_xp, _ = ppo_actor_loss(buf, net, PPOConfig(entropy_coef=0.0), negate_advantages=True)
    assert np.allclose(g_xp, -g_sp, atol=1e-7)


def test_entropy_coef_zero_means_no_entropy_gradient():
    rng = np.random.default_rng(5)
    net = actor_net(rng)
    buf = toy_buffer(rng, actor=net, advantages=np.zeros(12))
    _, grad0, _ = ppo_actor_loss(buf, net, PPOConfig(entropy_coef=0.0))
    assert np.all(grad0 == 0.0)
    _, grad1, _ = ppo_actor_loss(buf, net, PPOConfig(entropy_coef=0.01))
    assert not np.all(grad1 == 0.0)


def test_critic_loss_values_and_fd():
    rng = np.random.default_rng(6)
    spec = ApproximatorSpec(input_shape=(3,), hidden=(5,), output_dim=1)
    critic = Net(spec, init_params(spec, rng))
    obs = rng.standard_normal((6, 3)).astype(np.float32)
    returns = forward(spec, critic.params, obs)[:, 0].astype(np.float64)
    loss, _ = critic_loss(critic, obs, returns)
    assert loss == pytest.approx(0.0, abs=1e-10)

    zero = Net(spec, np.zeros(num_params(spec), dtype=np.float32))
    loss, _ = critic_loss(zero, obs, np.ones(6))
    assert loss == pytest.approx(1.0)

    critic64 = Net(spec, critic.params.astype(np.float64))
    targets = rng.standard_normal(6)
    _, grad = critic_loss(critic64, obs, targets)
    eps = 1e-6
    fd = np.zeros_like(critic64.params)
    for i in range(len(fd)):
        hi, lo = critic64.params.copy(), critic64.params.copy()
        hi[i] += eps
        lo[i] -= eps
        fd[i] = (critic_loss(Net(spec, hi), obs, targets)[0] - critic_loss(Net(spec, lo), obs, targets)[0]) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-5)
    assert np.max(np.abs(fd - grad) / denom) < 1e-3


def make_train_nets(rng, obs_dim=4, n_actions=3, lr=1e-3):
    aspec = ApproximatorSpec(input_shape=(obs_dim,), hidden=(6,), output_dim=n_actions)
    cspec = ApproximatorSpec(input_shape=(obs_dim,), hidden=(6,), output_dim=1, output_gain=1.0)
    actor = Net(aspec, init_params(aspec, rng))
    critic = Net(cspec, init_params(cspec, rng))
    return TrainNets(
        actor=actor,
        actor_opt=AdamState(lr=lr, size=len(actor.params)),
        self_critic=critic,
        self_opt=AdamState(lr=lr, size=len(critic.params)),
    )


def gae_buffer(rng, **kw):
    buf = toy_buffer(rng, **kw)
    buf.values = rng.standard_normal(len(buf)) * 0.1
    return compute_gae(buf, GAEConfig(0.99, 0.95))


def test_comedi_update_degenerate_weights_bit_identical():
    cfg0 = PPOConfig(alpha=0.0, beta=0.0, ppo_epochs=3, minibatches=2)

    def run(pass_buffers):
        rng = np.random.default_rng(7)
        nets = make_train_nets(rng)
        sp = gae_buffer(np.random.default_rng(100), actor=nets.actor)
        xp = gae_buffer(np.random.default_rng(101), actor=nets.actor) if pass_buffers else None
        mp = gae_buffer(np.random.default_rng(102), actor=nets.actor) if pass_buffers else None
        comedi_update(nets, sp, xp, mp, cfg0, np.random.default_rng(55))
        return nets.actor.params, nets.self_critic.params

    a0, c0 = run(False)
    a1, c1 = run(True)
    assert np.array_equal(a0, a1)
    assert np.array_equal(c0, c1)

    def run_plain():
        rng = np.random.default_rng(7)
        nets = make_train_nets(rng)
        sp = gae_buffer(np.random.default_rng(100), actor=nets.actor)
        selfplay_update(nets, sp, PPOConfig(alpha=0.9, beta=0.4, ppo_epochs=3, minibatches=2), np.random.default_rng(55))
        return nets.actor.params

    assert np.array_equal(run_plain(), a0)


def test_comedi_update_missing_buffer_errors():
    rng = np.random.default_rng(8)
    nets = make_train_nets(rng)
    sp = gae_buffer(np.random.default_rng(9), actor=nets.actor)
    with pytest.raises(ValueError):
        comedi_update(nets, sp, None, None, PPOConfig(alpha=0.5, beta=0.0), np.random.default_rng(0))
    with pytest.raises(ValueError):
        comedi_update(nets, sp, sp, None, PPOConfig(alpha=0.0, beta=0.5), np.random.default_rng(0))


def test_critic_regression_mostly_monotone():
    rng = np.random.default_rng(10)
    spec = ApproximatorSpec(input_shape=(3,), hidden=(16,), output_dim=1, output_gain=1.0)
    critic = Net(spec, init_params(spec, rng))
    opt = AdamState(lr=3e-3, size=len(critic.params))
    obs = rng.standard_normal((64, 3)).astype(np.float32)
    targets = np.sin(obs.sum(axis=1)).astype(np.float64)
    losses = []
    from convpool.nn.optim import adam_step, global_norm_clip

    for _ in range(200):
        loss, grad = critic_loss(critic, obs, targets)
        losses.append(loss)
        grad, _ = global_norm_clip(grad, 0.5)
        critic.params = adam_step(critic.params, grad, opt)
    drops = sum(1 for a, b in zip(losses[:-1], losses[1:]) if b < a)
    assert drops / (len(losses) - 1) >= 0.95


def test_adap_identical_actors_is_one():
    rng = np.random.default_rng(11)
    net = actor_net(rng)
    twin = Net(net.spec, net.params.copy())
    obs = rng.standard_normal((10, 4)).astype(np.float32)
    assert adap_regularizer([net, twin], obs) == pytest.approx(1.0, abs=1e-6)


def test_adap_known_kl_pair():
    # constant-logit nets realizing p=(0.5,0.5), q=(0.25,0.75):
    # penalty = (exp(-KL(p||q)) + exp(-KL(q||p))) / 2 over the two ordered pairs
    spec = ApproximatorSpec(input_shape=(1,), hidden=(), output_dim=2)
    p_net = Net(spec, np.zeros(num_params(spec), dtype=np.float32))
    q_net = Net(spec, np.zeros(num_params(spec), dtype=np.float32))
    p_net.params[2:] = np.log([0.5, 0.5]).astype(np.float32)
    q_net.params[2:] = np.log([0.25, 0.75]).astype(np.float32)
    obs = np.zeros((4, 1), dtype=np.float32)
    kl_pq = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    kl_qp = 0.25 * math.log(0.5) + 0.75 * math.log(1.5)
    expect = 0.5 * (math.exp(-kl_pq) + math.exp(-kl_qp))
    assert adap_regularizer([p_net, q_net], obs) == pytest.approx(expect, abs=1e-6)
    assert math.exp(-kl_pq) == pytest.approx(0.8661, abs=5e-4)


def test_adap_penalty_in_unit_interval_and_pool_size_check():
    rng = np.random.default_rng(12)
    actors = [actor_net(np.random.default_rng(s)) for s in range(4)]
    obs = rng.standard_normal((16, 4)).astype(np.float32)
    pen = adap_regularizer(actors, obs)
    assert 0.0 < pen <= 1.0
    with pytest.raises(ValueError):
        adap_regularizer(actors[:1], obs)


def test_adap_gradients_match_finite_differences():
    rng = np.random.default_rng(13)
    a = actor_net(rng, obs_dim=3, n_actions=3, hidden=(4,))
    b = actor_net(rng, obs_dim=3, n_actions=3, hidden=(4,))
    a.params = a.params.astype(np.float64)
    b.params = b.params.astype(np.float64)
    obs = rng.standard_normal((5, 3)).astype(np.float32)
    pen, grads = adap_gradients([a, b], obs)
    assert pen == pytest.approx(adap_regularizer([a, b], obs), abs=1e-9)
    eps = 1e-6
    for net, grad in zip([a, b], grads):
        fd = np.zeros_like(net.params)
        for i in range(len(fd)):
            hi, lo = net.params.copy(), net.params.copy()
            hi[i] += eps
            lo[i] -= eps
            nets_hi = [Net(net.spec, hi) if x is net else x for x in [a, b]]
            nets_lo = [Net(net.spec, lo) if x is net else x for x in [a, b]]
            fd[i] = (adap_regularizer(nets_hi, obs) - adap_regularizer(nets_lo, obs)) / (2 * eps)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-5)
        assert np.max(np.abs(fd - grad) / denom) < 1e-3


def test_ppo_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(clip_ratio=0.0)
    with pytest.raises(ValueError):
        PPOConfig(ppo_epochs=0)
    with pytest.raises(ValueError):
        PPOConfig(alpha=-0.1)


def test_critic_bank_growth_and_validation():
    rng = np.random.default_rng(14)
    spec = ApproximatorSpec(input_shape=(4,), hidden=(4,), output_dim=1, output_gain=1.0)
    bank = CriticBank(spec)
    for i in range(3):
        bank.add_convention(i, rng)
    bank.validate()
    assert len(bank.self_critics) == 3
    assert len(bank.cross_critics) == 6
    assert set(bank.cross_critics) == {(i, j) for i in range(3) for j in range(3) if i != j}
    with pytest.raises(ValueError):
        bank.add_convention(1, rng)
    del bank.cross_critics[(0, 1)]
    with pytest.raises(ValueError):
        bank.validate()
