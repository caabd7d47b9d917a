import numpy as np
import pytest

from arisee import nn


def small_batch(seed, net, b=6):
    rng = np.random.default_rng(seed)
    states = rng.standard_normal((b, net.n_inputs))
    actions = rng.integers(0, net.n_choices, (b, net.n_elements))
    logp_old = rng.normal(-net.n_elements * np.log(net.n_choices), 0.3, b)
    adv = rng.standard_normal(b)
    ret = rng.standard_normal(b)
    return states, actions, logp_old, adv, ret


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def numeric_gradient(net, args, h=1e-6):
    flat = net.get_flat()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (1, -1):
            w = flat.copy()
            w[i] += sign * h
            net.set_flat(w)
            loss, _, _ = nn.ppo_loss(net, *args, with_grad=False)
            grad[i] += sign * loss / (2 * h)
    net.set_flat(flat)
    return grad


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d, e, c, h = rng.integers(2, 5), rng.integers(1, 3), rng.integers(2, 5), rng.integers(3, 8)
    net = nn.ActorCritic.create(d, e, c, h, seed=seed, scale_policy=1.0)
    assert net.n_params <= 500
    args = small_batch(seed, net)
    _, grads, _ = nn.ppo_loss(net, *args)
    assert relative_error(nn.flatten_grads(grads), numeric_gradient(net, args)) < 1e-4


def test_zero_weights_give_uniform_policy():
    net = nn.ActorCritic.create(5, 3, 4, 8)
    net.set_flat(np.zeros(net.n_params))
    logp, value, _ = nn.forward(net, np.ones((2, 5)))
    assert np.allclose(np.exp(logp), 0.25)
    assert np.allclose(value, 0.0)


def test_probabilities_sum_to_one():
    net = nn.ActorCritic.create(4, 3, 6, 16, seed=3, scale_policy=2.0)
    logp, _, _ = nn.forward(net, np.random.default_rng(0).standard_normal((10, 4)))
    assert np.allclose(np.exp(logp).sum(axis=2), 1.0, atol=1e-6)


def test_mask_removes_choices():
    net = nn.ActorCritic.create(3, 2, 4, 8, seed=1, scale_policy=1.0)
    mask = np.array([True, False, True, False])
    logp, _, _ = nn.forward(net, np.ones((1, 3)), mask)
    probs = np.exp(logp)
    assert np.all(probs[..., ~mask] == 0)
    assert np.allclose(probs.sum(axis=2), 1.0)


def test_same_seed_same_initialization():
    a = nn.ActorCritic.create(4, 2, 3, 8, seed=11)
    b = nn.ActorCritic.create(4, 2, 3, 8, seed=11)
    assert np.array_equal(a.get_flat(), b.get_flat())
    assert not np.array_equal(a.get_flat(), nn.ActorCritic.create(4, 2, 3, 8, seed=12).get_flat())


def test_dimension_mismatch_raises():
    net = nn.ActorCritic.create(4, 2, 3, 8)
    with pytest.raises(ValueError):
        nn.forward(net, np.ones((1, 5)))
    with pytest.raises(ValueError):
        net.set_flat(np.zeros(3))


def test_snapshot_round_trip():
    net = nn.ActorCritic.create(4, 2, 3, 8, seed=5)
    snap = net.snapshot()
    assert snap[:5] == [nn.SNAPSHOT_VERSION, 4, 2, 3, 8]
    back = nn.ActorCritic.from_snapshot(snap)
    assert np.array_equal(back.get_flat(), net.get_flat())
    with pytest.raises(ValueError):
        nn.ActorCritic.from_snapshot([99] + snap[1:])


def test_ratio_identity_at_behavior_policy():
    net = nn.ActorCritic.create(4, 2, 3, 8, seed=2, scale_policy=1.0)
    states, actions, _, adv, ret = small_batch(0, net)
    logp, _, _ = nn.forward(net, states)
    lp = np.take_along_axis(logp, actions[:, :, None], axis=2)[:, :, 0].sum(axis=1)
    _, _, info = nn.ppo_loss(net, states, actions, lp, adv, ret, with_grad=False)
    assert np.allclose(info["ratio"], 1.0)
    assert info["policy_objective"] == pytest.approx(adv.mean())


def test_adam_step_decreases_loss():
    net = nn.ActorCritic.create(3, 1, 2, 8, seed=0)
    states = np.ones((4, 3))
    args = (states, np.zeros((4, 1), dtype=int), np.zeros(4), np.zeros(4), np.full(4, 3.0))
    opt = nn.Adam(lr=1e-2)
    before, _, _ = nn.ppo_loss(net, *args, entropy_coef=0.0, with_grad=False)
    for _ in range(20):
        _, grads, _ = nn.ppo_loss(net, *args, entropy_coef=0.0)
        opt.step(net, grads)
    after, _, _ = nn.ppo_loss(net, *args, entropy_coef=0.0, with_grad=False)
    assert after < before
