"""Per-element on/off and phase control trained with clipped-surrogate PPO.

Each element picks one of ``2 * 2**b`` joint choices ``c = on * 2**b + phase``.
The policy factorizes over elements, so the joint log-probability of an action
is the sum of the per-element log-probabilities.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, model, nn
from .config import ScenarioConfig

GUARDS = ("per_ue", "sum")
RESAMPLE = ("never", "episode")
BEAMFORMERS = ("fixed", "rzf")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class PpoHyperparams:
    clip: float = 0.2                # epsilon
    xi: float = 0.9                  # discount
    lr: float = 2e-3
    minibatch: int = 64
    epochs: int = 10                 # passes over each rollout batch
    episodes: int = 200
    steps: int = 32                  # steps per episode
    episodes_per_update: int = 2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    hidden: int = 64
    normalize_advantages: bool = True
    max_grad_norm: float | None = 0.5
    guard: str = "per_ue"
    resample: str = "never"
    time_feature: bool = True        # append t/steps to the state so the critic sees the horizon

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if self.guard not in GUARDS:
            raise ValueError(f"guard must be one of {GUARDS}")
        if self.resample not in RESAMPLE:
            raise ValueError(f"resample must be one of {RESAMPLE}")
        if self.episodes < 0 or self.steps < 1 or self.minibatch < 1 or self.epochs < 1:
            raise ValueError("episode/step/batch counts must be positive")


# --------------------------------------------------------------------------
# reward and return bookkeeping
# --------------------------------------------------------------------------


def rate_guard_fails(cfg: ScenarioConfig, rates: np.ndarray, guard: str = "per_ue") -> np.ndarray:
    """True where the QoS guard fires; ``rates`` has UEs on the last axis."""
    rates = np.asarray(rates)
    if guard == "per_ue":
        return np.any(rates < cfg.r_min, axis=-1)
    if guard == "sum":
        return np.sum(rates, axis=-1) < cfg.r_min
    raise ValueError(f"unknown guard {guard!r}")


def reward(cfg: ScenarioConfig, ch: model.ChannelRealization, ris: model.RisControl, g,
           guard: str = "per_ue") -> float:
    """``-1`` when the rate guard fails, otherwise the energy efficiency."""
    rates = model.user_rates(cfg, ch, ris, g)
    if rate_guard_fails(cfg, rates, guard):
        return -1.0
    return float(np.sum(rates) / model.total_power(cfg, ris, g))


def discounted_returns(rewards, xi: float) -> np.ndarray:
    if not 0 <= xi < 1:
        raise ValueError("xi must lie in [0, 1)")
    rewards = np.asarray(rewards, dtype=float)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + xi * acc
        out[t] = acc
    return out


def advantage(returns, values, normalize: bool = False) -> np.ndarray:
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    if returns.shape != values.shape:
        raise ValueError("returns and values must have the same length")
    adv = returns - values
    if normalize and adv.size > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


def probability_ratio(logp_new, logp_old):
    return np.exp(np.asarray(logp_new, dtype=float) - np.asarray(logp_old, dtype=float))


def clipped_surrogate(ratio, adv, epsilon: float) -> float:
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    return float(np.mean(np.minimum(ratio * adv, np.clip(ratio, 1 - epsilon, 1 + epsilon) * adv)))


@dataclass
class RolloutBuffer:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logp: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    advantages: list = field(default_factory=list)

    def add_episode(self, states, actions, logp, rewards, values, xi):
        ret = discounted_returns(rewards, xi)
        self.states.append(states)
        self.actions.append(actions)
        self.logp.append(logp)
        self.rewards.append(np.asarray(rewards, dtype=float))
        self.values.append(values)
        self.returns.append(ret)
        self.advantages.append(advantage(ret, values))

    def arrays(self):
        return tuple(np.concatenate(x) for x in (self.states, self.actions, self.logp,
                                                  self.returns, self.advantages))

    def __len__(self):
        return sum(len(r) for r in self.rewards)


# --------------------------------------------------------------------------
# environment
# --------------------------------------------------------------------------


class RisEnv:
    """Bandit-style MDP over RIS configurations with fixed positions and beamformer.

    Parameters
    ----------
    cfg, geom, ch, g : scenario, geometry, channels and beamformer
    nps : if True, phases are frozen at 0 and only on/off is chosen
    guard : QoS rule that turns the reward into ``-1``
    beamformer : ``"fixed"`` scores every action with ``g``; ``"rzf"`` re-derives
        a regularized zero-forcing beamformer per action at the power of ``g``
    """

    def __init__(self, cfg: ScenarioConfig, geom: model.Geometry, ch: model.ChannelRealization,
                 g: np.ndarray, nps: bool = False, guard: str = "per_ue", beamformer: str = "fixed"):
        if beamformer not in BEAMFORMERS:
            raise ValueError(f"beamformer must be one of {BEAMFORMERS}")
        self.cfg = cfg
        self.geom = geom
        self.beamformer = beamformer
        self.g = np.asarray(g, dtype=complex)
        self.nps = nps
        self.guard = guard
        self.n_aris = geom.aris.shape[0]
        self.n_levels = cfg.n_phases
        self.n_choices = 2 * self.n_levels
        self.n_elements = self.n_aris * cfg.n_elements
        mask = np.ones(self.n_choices, dtype=bool)
        if nps:
            mask[:] = False
            mask[0] = True
            mask[self.n_levels] = True
        self.mask = mask
        self.reward_unit = cfg.n_ues * cfg.bandwidth / self.static_power()
        self.set_channel(ch)

    def static_power(self) -> float:
        return self.cfg.n_ues * self.cfg.p_circuit + model.hover_total(self.cfg, self.n_aris)

    def set_channel(self, ch: model.ChannelRealization) -> None:
        self.ch = ch
        self.cascade = ch.cascade_tensor()
        self.state = self._state_vector()

    def _state_vector(self) -> np.ndarray:
        cfg = self.cfg
        sk = math.sqrt(cfg.ref_gain)
        parts = [self.geom.ues[:, :2].ravel() / cfg.area, self.geom.aris.ravel() / cfg.area]
        for arr in (self.ch.direct, self.ch.bs_aris, self.ch.aris_ue):
            parts += [arr.real.ravel() / sk, arr.imag.ravel() / sk]
        gs = self.g / math.sqrt(cfg.p_max)
        parts += [gs.real.ravel(), gs.imag.ravel()]
        state = np.concatenate(parts)
        return np.nan_to_num(state)

    @property
    def state_dim(self) -> int:
        return self.state.size

    def decode(self, action) -> model.RisControl:
        action = np.asarray(action, dtype=np.int64).reshape(self.n_aris, self.cfg.n_elements)
        if np.any(~self.mask[action]):
            raise ValueError("action uses a masked choice")
        delta = action // self.n_levels
        phase = action % self.n_levels
        return model.RisControl(delta, phase, self.cfg.phase_bits,
                                np.full(delta.shape, self.cfg.beta))

    def encode(self, ris: model.RisControl) -> np.ndarray:
        return (ris.delta.astype(np.int64) * self.n_levels + ris.phase_idx).ravel()

    def evaluate(self, actions: np.ndarray):
        """Batched ``(ee, rates, failed)`` for integer actions of shape ``(B, E)``."""
        actions = np.atleast_2d(np.asarray(actions, dtype=np.int64))
        delta = actions // self.n_levels
        theta = 2.0 * np.pi * (actions % self.n_levels) / self.n_levels
        coeffs = delta * self.cfg.beta * np.exp(1j * theta)
        cfg = self.cfg
        tx_power = float(np.sum(np.abs(self.g) ** 2))
        if self.beamformer == "fixed":
            sinr = kernels.batch_sinr(self.ch.direct, self.cascade, coeffs, self.g[None], cfg.noise_power)
        else:
            eff = kernels.effective_channels(self.ch.direct, self.cascade, coeffs)
            g = model.rzf_beamformer(eff, tx_power, cfg.noise_power)
            sinr = kernels.sinr_from_effective(eff, g, cfg.noise_power)
        rates = cfg.bandwidth * np.log2(1.0 + sinr)
        tx = cfg.zeta * tx_power + self.g.shape[0] * cfg.p_circuit
        on = delta.sum(axis=1)
        elem = on * (cfg.n_elements if cfg.power_model == "literal" else 1) * cfg.p_element
        power = tx + elem + model.hover_total(cfg, self.n_aris)
        ee = rates.sum(axis=1) / power
        failed = rate_guard_fails(cfg, rates, self.guard)
        return ee, rates, failed

    def rewards(self, actions: np.ndarray) -> np.ndarray:
        """Raw rewards: EE in bits/J, or ``-1`` where the guard fires."""
        ee, _, failed = self.evaluate(actions)
        return np.where(failed, -1.0, ee)

    def training_rewards(self, actions: np.ndarray) -> np.ndarray:
        """Rewards with EE expressed in units of ``K*W / static power``."""
        ee, _, failed = self.evaluate(actions)
        return np.where(failed, -1.0, ee / self.reward_unit)


# --------------------------------------------------------------------------
# agent and training
# --------------------------------------------------------------------------


@dataclass
class PpoAgent:
    net: nn.ActorCritic
    opt: nn.Adam
    rng: np.random.Generator
    time_feature: bool = False

    @classmethod
    def create(cls, env: RisEnv, hyper: PpoHyperparams, seed: int) -> "PpoAgent":
        dim = env.state_dim + (1 if hyper.time_feature else 0)
        net = nn.ActorCritic.create(dim, env.n_elements, env.n_choices, hyper.hidden, seed)
        return cls(net, nn.Adam(lr=hyper.lr, max_grad_norm=hyper.max_grad_norm),
                   np.random.default_rng(seed + 7919), hyper.time_feature)

    def compatible(self, env: RisEnv) -> bool:
        dim = env.state_dim + (1 if self.time_feature else 0)
        return (self.net.n_inputs == dim and self.net.n_elements == env.n_elements
                and self.net.n_choices == env.n_choices)

    def states(self, env: RisEnv, steps: int) -> np.ndarray:
        """Per-step network inputs for one episode."""
        base = np.repeat(env.state[None], steps, axis=0)
        if not self.time_feature:
            return base
        return np.column_stack([base, np.arange(steps) / steps])


def sample_actions(logp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One joint action per row of per-element categoricals ``logp (T, E, C)``."""
    cdf = np.cumsum(np.exp(logp), axis=2)
    cdf[:, :, -1] = 1.0
    u = rng.random(logp.shape[:2] + (1,))
    return np.argmax(u < cdf, axis=2)


def greedy_action(net: nn.ActorCritic, env: RisEnv) -> np.ndarray:
    """Per-element argmax of the policy at the first step of an episode."""
    state = env.state
    if net.n_inputs == env.state_dim + 1:
        state = np.append(state, 0.0)
    logp, _, _ = nn.forward(net, state[None], env.mask)
    return np.argmax(logp[0], axis=1)


@dataclass
class PpoResult:
    ris: model.RisControl
    ee: float
    curve: list            # per-episode cumulative training reward
    greedy_curve: list     # per-episode EE of the greedy decode (bits/J)
    agent: PpoAgent
    best_ris: model.RisControl | None = None  # best configuration sampled during training
    best_ee: float = -np.inf


def ppo_train(env: RisEnv, hyper: PpoHyperparams | None = None, seed: int = 0,
              agent: PpoAgent | None = None, fading: model.FadingDraws | None = None,
              rng: np.random.Generator | None = None, record_greedy: bool = True) -> PpoResult:
    """Train (or continue training) the agent on ``env`` and decode greedily."""
    hyper = hyper or PpoHyperparams()
    if agent is None or not agent.compatible(env):
        agent = PpoAgent.create(env, hyper, seed)
    base_ch = env.ch
    draw_rng = rng if rng is not None else np.random.default_rng(seed + 104729)
    curve: list[float] = []
    greedy_curve: list[float] = []
    buf = RolloutBuffer()
    best_act, best_val = None, -np.inf
    for ep in range(hyper.episodes):
        if hyper.resample == "episode":
            fad = model.draw_fading(draw_rng, env.cfg, env.n_aris)
            env.set_channel(model.build_channels(env.cfg, env.geom, fad))
        states = agent.states(env, hyper.steps)
        logp, values, _ = nn.forward(agent.net, states, env.mask)
        actions = sample_actions(logp, agent.rng)
        rewards = env.training_rewards(actions)
        lp = np.take_along_axis(logp, actions[:, :, None], axis=2)[:, :, 0].sum(axis=1)
        buf.add_episode(states, actions, lp, rewards, values, hyper.xi)
        curve.append(float(np.sum(rewards)))
        if hyper.resample != "episode":
            i = int(np.argmax(rewards))
            if rewards[i] > best_val:
                best_act, best_val = actions[i].copy(), float(rewards[i])
        if (ep + 1) % hyper.episodes_per_update == 0 or ep == hyper.episodes - 1:
            _update(agent, buf, env, hyper)
            buf = RolloutBuffer()
        if hyper.resample == "episode":
            env.set_channel(base_ch)
        if record_greedy:
            greedy_curve.append(float(env.rewards(greedy_action(agent.net, env)[None])[0]))
    env.set_channel(base_ch)
    act = greedy_action(agent.net, env)
    ris = env.decode(act)
    ee = float(env.rewards(act[None])[0])
    if best_act is None:
        return PpoResult(ris, ee, curve, greedy_curve, agent, ris, ee)
    best_ee = float(env.rewards(best_act[None])[0])
    if best_ee < ee:
        return PpoResult(ris, ee, curve, greedy_curve, agent, ris, ee)
    return PpoResult(ris, ee, curve, greedy_curve, agent, env.decode(best_act), best_ee)


def _update(agent: PpoAgent, buf: RolloutBuffer, env: RisEnv, hyper: PpoHyperparams) -> None:
    states, actions, logp_old, returns, adv = buf.arrays()
    if hyper.normalize_advantages:
        adv = advantage(returns, returns - adv, normalize=True)
    n = len(returns)
    for _ in range(hyper.epochs):
        order = agent.rng.permutation(n)
        for start in range(0, n, hyper.minibatch):
            idx = order[start:start + hyper.minibatch]
            loss, grads, _ = nn.ppo_loss(agent.net, states[idx], actions[idx], logp_old[idx],
                                         adv[idx], returns[idx], hyper.clip, hyper.value_coef,
                                         hyper.entropy_coef, env.mask)
            flat = nn.flatten_grads(grads)
            if not np.isfinite(loss) or not np.all(np.isfinite(flat)):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} after {agent.opt.t} optimizer steps")
            agent.opt.step(agent.net, flat)


# --------------------------------------------------------------------------
# exhaustive oracle
# --------------------------------------------------------------------------


def brute_force_oracle(env: RisEnv, limit: int = 10 ** 6, chunk: int = 4096):
    """Enumerate every joint action; returns ``(RisControl, ee, n_candidates)``.

    Candidates that fail the rate guard score ``-1`` exactly as in training.
    """
    choices = np.flatnonzero(env.mask)
    total = len(choices) ** env.n_elements
    if total > limit:
        raise ValueError(f"search space {total} exceeds limit {limit}")
    best_val = -np.inf
    best_act = None
    it = itertools.product(choices, repeat=env.n_elements)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        vals = env.rewards(block)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_act = block[i]
    return env.decode(best_act), best_val, total
