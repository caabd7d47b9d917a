import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arisee import harness, model, nn, ppo
from arisee.config import ScenarioConfig, db_to_linear


def make_env(cfg, seed=0, **kw):
    rng = np.random.default_rng(seed)
    geom = model.make_geometry(rng, cfg)
    ch, _ = model.sample_channels(rng, cfg, geom)
    g = model.mrt_beamformer(ch.direct, cfg.p_max)
    return ppo.RisEnv(cfg, geom, ch, g, **kw)


# -- returns, advantages, ratio, surrogate ---------------------------------


def test_discounted_returns_examples():
    assert np.allclose(ppo.discounted_returns([1, 1, 1], 0.9), [2.71, 1.9, 1.0])
    assert np.allclose(ppo.discounted_returns([3, -1, 2], 0.0), [3, -1, 2])


@given(st.floats(-5, 5), st.integers(1, 40), st.floats(0.01, 0.99))
def test_discounted_returns_geometric(r, h, xi):
    out = ppo.discounted_returns([r] * h, xi)
    assert out[0] == pytest.approx(r * (1 - xi ** h) / (1 - xi), abs=1e-9)


def test_advantage_examples():
    ret = np.array([1.0, 2.0, 3.0])
    assert np.all(ppo.advantage(ret, ret) == 0)
    assert np.array_equal(ppo.advantage(ret, np.zeros(3)), ret)
    norm = ppo.advantage(np.random.default_rng(0).normal(5, 3, 100), np.zeros(100), normalize=True)
    assert norm.mean() == pytest.approx(0.0, abs=1e-12)
    assert norm.std() == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        ppo.advantage(ret, np.zeros(2))


def test_probability_ratio_examples():
    assert ppo.probability_ratio(-1.3, -1.3) == 1.0
    assert ppo.probability_ratio(math.log(2) - 4, -4) == pytest.approx(2.0)
    assert ppo.probability_ratio(-1.0, -2.0) > 1 > ppo.probability_ratio(-2.0, -1.0)


def test_clipped_surrogate_examples():
    for eps in (0.1, 0.2, 0.5):
        assert ppo.clipped_surrogate(1.0, 3.0, eps) == 3.0
    assert ppo.clipped_surrogate(2.0, 1.0, 0.2) == pytest.approx(1.2)
    assert ppo.clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)


@given(st.floats(0.0, 10.0), st.floats(-10, 10), st.floats(0.01, 0.99))
def test_clip_bound(ratio, adv, eps):
    val = ppo.clipped_surrogate(ratio, adv, eps)
    assert abs(val) <= max(abs(adv) * (1 + eps), abs(adv * ratio)) + 1e-12
    if adv >= 0:
        assert val <= adv * (1 + eps) + 1e-12


def test_hyperparams_validation():
    for bad in (dict(clip=0.0), dict(clip=1.0), dict(xi=0.0), dict(xi=1.0), dict(guard="x"),
                dict(resample="x")):
        with pytest.raises(ValueError):
            ppo.PpoHyperparams(**bad)


def test_rollout_buffer_bookkeeping():
    buf = ppo.RolloutBuffer()
    buf.add_episode(np.zeros((3, 2)), np.zeros((3, 1), int), np.zeros(3), [1, 1, 1], np.array([0.5, 0.5, 0.5]), 0.9)
    states, actions, logp, ret, adv = buf.arrays()
    assert len(buf) == 3
    assert np.allclose(ret, [2.71, 1.9, 1.0])
    assert np.allclose(adv, ret - 0.5)


# -- reward and guard --------------------------------------------------------


def test_reward_guard_fires_when_rates_too_low():
    cfg = ScenarioConfig(n_ues=2, n_aris=1, n_elements=2, n_antennas=2, r_min=1e12)
    env = make_env(cfg)
    off = model.RisControl.all_off(cfg)
    assert ppo.reward(cfg, env.ch, off, env.g) == -1.0
    assert env.rewards(env.encode(off)[None])[0] == -1.0


def test_reward_without_guard_is_ee():
    cfg = ScenarioConfig(n_ues=2, n_aris=1, n_elements=2, n_antennas=2, r_min=0.0)
    env = make_env(cfg)
    rng = np.random.default_rng(1)
    for _ in range(5):
        ris = model.RisControl.random(rng, cfg)
        ee = model.energy_efficiency(cfg, env.ch, ris, env.g)
        assert ppo.reward(cfg, env.ch, ris, env.g) == pytest.approx(ee)
        assert env.rewards(env.encode(ris)[None])[0] == pytest.approx(ee, rel=1e-10)


def test_reward_desk_value_matches_model(desk):
    env = make_env(desk.with_(r_min=0.0), seed=3)
    ris = model.RisControl.random(np.random.default_rng(4), desk)
    expected = model.sum_rate(desk, env.ch, ris, env.g) / model.total_power(desk, ris, env.g)
    assert env.rewards(env.encode(ris)[None])[0] == pytest.approx(expected, rel=1e-10)


def test_sum_guard_is_weaker_than_per_ue():
    cfg = ScenarioConfig(r_min=1.0)
    rates = np.array([[0.5, 5.0], [2.0, 2.0]])
    assert list(ppo.rate_guard_fails(cfg, rates, "per_ue")) == [True, False]
    assert list(ppo.rate_guard_fails(cfg, rates, "sum")) == [False, False]


def test_rzf_env_scores_with_rederived_beamformer():
    cfg = ScenarioConfig(n_ues=2, n_aris=1, n_elements=2, n_antennas=3, r_min=0.0)
    env = make_env(cfg, beamformer="rzf")
    ris = model.RisControl.random(np.random.default_rng(2), cfg)
    eff = model.effective_channels(env.ch, ris)
    g = model.rzf_beamformer(eff, float(np.sum(np.abs(env.g) ** 2)), cfg.noise_power)
    assert env.rewards(env.encode(ris)[None])[0] == pytest.approx(
        model.energy_efficiency(cfg, env.ch, ris, g), rel=1e-9)


# -- actions, decoding, oracle ---------------------------------------------


def test_sampled_actions_decode_to_valid_controls():
    cfg = ScenarioConfig(n_ues=1, n_aris=2, n_elements=3, n_antennas=2, phase_bits=2)
    env = make_env(cfg)
    net = nn.ActorCritic.create(env.state_dim, env.n_elements, env.n_choices, 8, scale_policy=3.0)
    logp, _, _ = nn.forward(net, np.repeat(env.state[None], 50, axis=0))
    for act in ppo.sample_actions(logp, np.random.default_rng(0)):
        ris = env.decode(act)
        assert set(np.unique(ris.delta)) <= {0, 1}
        assert np.all((ris.phase_idx >= 0) & (ris.phase_idx < 4))
        assert np.array_equal(env.encode(ris), act)


def test_nps_mask_freezes_phase():
    cfg = ScenarioConfig(n_ues=1, n_aris=1, n_elements=2, n_antennas=2, phase_bits=2)
    env = make_env(cfg, nps=True)
    assert env.mask.sum() == 2
    _, _, total = ppo.brute_force_oracle(env)
    assert total == 4
    with pytest.raises(ValueError):
        env.decode([1, 0])


def test_single_element_one_bit_enumerates_four():
    cfg = ScenarioConfig(n_ues=1, n_aris=1, n_elements=1, n_antennas=2, phase_bits=1)
    _, _, total = ppo.brute_force_oracle(make_env(cfg))
    assert total == 4


def test_oracle_rejects_large_space():
    cfg = ScenarioConfig(n_ues=1, n_aris=2, n_elements=10, n_antennas=2, phase_bits=2)
    with pytest.raises(ValueError):
        ppo.brute_force_oracle(make_env(cfg))


def test_oracle_turns_everything_off_when_elements_are_expensive():
    cfg = harness.oracle_scenario(p_element=1e6, r_min=0.0)
    ris, ee, _ = ppo.brute_force_oracle(make_env(cfg))
    assert np.all(ris.delta == 0)


def test_oracle_matches_loop_enumeration():
    cfg = harness.oracle_scenario(n_elements=2, r_min=0.0)
    env = make_env(cfg, seed=2)
    _, best, _ = ppo.brute_force_oracle(env, chunk=3)
    vals = []
    for a in range(4):
        for b in range(4):
            ris = env.decode([a, b])
            vals.append(model.energy_efficiency(cfg, env.ch, ris, env.g))
    assert best == pytest.approx(max(vals), rel=1e-10)


# -- training ------------------------------------------------------------------


def test_flat_environment_gives_flat_curve():
    # a single element whose cascaded channel is zero: every action earns the same EE
    cfg = ScenarioConfig(n_ues=1, n_aris=1, n_elements=1, n_antennas=2, phase_bits=1, r_min=0.0,
                         p_element=0.0)
    env = make_env(cfg)
    env.set_channel(model.ChannelRealization(env.ch.direct, np.zeros_like(env.ch.bs_aris), env.ch.aris_ue))
    res = ppo.ppo_train(env, ppo.PpoHyperparams(episodes=6, steps=8), seed=0)
    const = env.rewards(np.zeros((1, 1), int))[0] / env.reward_unit
    assert np.allclose(res.curve, 8 * const, rtol=1e-12)


def test_training_is_deterministic():
    cfg = harness.oracle_scenario()
    hyper = ppo.PpoHyperparams(episodes=6, steps=8)
    a = ppo.ppo_train(make_env(cfg), hyper, seed=3)
    b = ppo.ppo_train(make_env(cfg), hyper, seed=3)
    assert a.curve == b.curve
    assert np.array_equal(a.agent.net.get_flat(), b.agent.net.get_flat())


def test_best_visited_never_worse_than_greedy():
    cfg = harness.oracle_scenario()
    env = make_env(cfg, seed=1)
    res = ppo.ppo_train(env, ppo.PpoHyperparams(episodes=10, steps=16), seed=1)
    assert res.best_ee >= res.ee
    _, opt, _ = ppo.brute_force_oracle(env)
    assert opt >= res.best_ee - 1e-9 * abs(opt)


def test_divergence_halts_with_diagnostic():
    cfg = harness.oracle_scenario()
    env = make_env(cfg)
    agent = ppo.PpoAgent.create(env, ppo.PpoHyperparams(), 0)
    agent.net.params["W1"][0, 0] = np.nan
    with pytest.raises(ppo.TrainingDivergedError):
        ppo.ppo_train(env, ppo.PpoHyperparams(episodes=2, steps=4), agent=agent)


@pytest.mark.parametrize("seed", [0, 1])
def test_greedy_reaches_oracle_on_tiny_instance(seed):
    out = harness.oracle_check(seed)
    assert out.ratio >= 0.95
    assert out.aligned
