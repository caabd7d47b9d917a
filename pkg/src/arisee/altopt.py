"""Alternating optimization of deployment, RIS control and beamforming, plus baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model, ppo, sca, woa
from .config import ScenarioConfig

BASELINES = ("proposed", "single_aris", "aris_nps", "random", "uav_relay")


class StageError(RuntimeError):
    """A sub-solver failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RelayParams:
    power: float | None = None        # W per relay; None -> p_max
    amp_efficiency: float | None = None  # None -> scenario amplifier efficiency
    circuit_power: float = 0.1        # W per relay radio chain
    search_steps: tuple = (8.0, 4.0, 2.0, 1.0)  # m, pattern-search step sizes


@dataclass
class SolverParams:
    sca: sca.ScaParams = field(default_factory=sca.ScaParams)
    ppo: ppo.PpoHyperparams = field(default_factory=ppo.PpoHyperparams)
    woa: woa.WoaParams = field(default_factory=woa.WoaParams)
    relay: RelayParams = field(default_factory=RelayParams)
    eps_outer: float = 1e-3           # relative EE change that ends the loop
    tau_max: int = 20
    ris_beamformer: str = "rzf"       # beamformer the RIS stage scores candidates with: "fixed" or "rzf"

    def __post_init__(self):
        if self.ris_beamformer not in ppo.BEAMFORMERS:
            raise ValueError(f"ris_beamformer must be one of {ppo.BEAMFORMERS}")
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if not self.eps_outer > 0:
            raise ValueError("eps_outer must be > 0")


@dataclass
class TraceRecord:
    tau: int
    ee: float
    sum_rate: float
    power: float
    slacks: dict


@dataclass
class SolutionState:
    geom: model.Geometry
    fading: model.FadingDraws
    ris: model.RisControl
    g: np.ndarray
    objective: float = 0.0
    tau: int = 0
    trace: list = field(default_factory=list)
    ppo_curves: list = field(default_factory=list)
    sum_rate: float = 0.0
    power: float = 0.0
    slacks: dict = field(default_factory=dict)
    kind: str = "proposed"

    @property
    def q(self) -> np.ndarray:
        return self.geom.aris

    def channels(self, cfg: ScenarioConfig) -> model.ChannelRealization:
        return model.build_channels(cfg, self.geom, self.fading)


# --------------------------------------------------------------------------
# scenario construction shared by all schemes
# --------------------------------------------------------------------------


def scenario_draws(cfg: ScenarioConfig, seed: int):
    """UE positions and fading for ``cfg.n_aris`` ARISs; identical across schemes per seed."""
    rng = np.random.default_rng(seed)
    ues = model.sample_ue_positions(rng, cfg)
    fading = model.draw_fading(rng, cfg)
    return ues, fading, rng


def _evaluate(cfg, state: SolutionState) -> SolutionState:
    ch = state.channels(cfg)
    state.sum_rate = model.sum_rate(cfg, ch, state.ris, state.g)
    state.power = model.total_power(cfg, state.ris, state.g)
    state.objective = state.sum_rate / state.power
    rep = model.check_constraints(cfg, ch, state.ris, state.g, state.q)
    state.slacks = rep.as_dict()
    return state


def _rate_ok(cfg, ch, ris, g) -> bool:
    return bool(np.all(model.user_rates(cfg, ch, ris, g) >= cfg.r_min))


def _better(cfg, ch, ris_new, g_new, ris_old, g_old) -> bool:
    """Keep-best rule: QoS feasibility first, then energy efficiency."""
    ok_new, ok_old = _rate_ok(cfg, ch, ris_new, g_new), _rate_ok(cfg, ch, ris_old, g_old)
    if ok_new != ok_old:
        return ok_new
    return (model.energy_efficiency(cfg, ch, ris_new, g_new)
            >= model.energy_efficiency(cfg, ch, ris_old, g_old))


def warm_starts(cfg: ScenarioConfig, eff: np.ndarray, g) -> list:
    """Beamformers seeded into the WOA population: the incumbent, MRT and RZF."""
    return [np.asarray(g, dtype=complex), model.mrt_beamformer(eff, cfg.p_max),
            model.rzf_beamformer(eff, cfg.p_max, cfg.noise_power)]


def stage_beamformer(cfg: ScenarioConfig, ch, ris, g, mode: str) -> np.ndarray:
    """Beamformer paired with ``ris`` in the RIS stage: ``g`` itself, or RZF at the power of ``g``."""
    if mode == "fixed":
        return np.asarray(g, dtype=complex)
    power = float(np.sum(np.abs(g) ** 2))
    return model.rzf_beamformer(model.effective_channels(ch, ris), power, cfg.noise_power)


def _record(state: SolutionState, tau: int) -> None:
    state.trace.append(TraceRecord(tau, state.objective, state.sum_rate, state.power, dict(state.slacks)))


# --------------------------------------------------------------------------
# alternating optimizer
# --------------------------------------------------------------------------


def initial_state(cfg: ScenarioConfig, seed: int, aris=None, ues=None, fading=None) -> SolutionState:
    if ues is None or fading is None:
        ues, fading, _ = scenario_draws(cfg, seed)
    aris = model.circle_placement(cfg) if aris is None else np.asarray(aris, dtype=float)
    geom = model.Geometry(cfg.bs_position, ues, aris)
    ris = model.RisControl.all_on(cfg, aris.shape[0])
    ch = model.build_channels(cfg, geom, fading)
    g = model.mrt_beamformer(model.effective_channels(ch, ris), cfg.p_max)
    return _evaluate(cfg, SolutionState(geom, fading, ris, g))


def alternating_optimize(cfg: ScenarioConfig, seed: int = 0, params: SolverParams | None = None,
                         state: SolutionState | None = None, nps: bool = False) -> SolutionState:
    """Deployment -> RIS control -> beamforming, repeated until EE settles."""
    params = params or SolverParams()
    state = initial_state(cfg, seed) if state is None else state
    if nps:
        state.ris.phase_idx[:] = 0
    _record(state, 0)
    agent = None
    sca_rng = np.random.default_rng(seed + 1)
    for tau in range(1, params.tau_max + 1):
        prev = state.objective
        # P1: deployment
        try:
            sol = sca.sca_iterate(cfg, state.geom, state.fading, state.ris, state.g, params.sca, sca_rng)
        except Exception as exc:  # noqa: BLE001
            raise StageError("deployment", exc) from exc
        state.geom = state.geom.with_aris(sol.positions)
        ch = state.channels(cfg)
        # P2: on/off and phases
        try:
            env = ppo.RisEnv(cfg, state.geom, ch, state.g, nps=nps, guard=params.ppo.guard,
                             beamformer=params.ris_beamformer)
            res = ppo.ppo_train(env, params.ppo, seed=seed * 1000 + tau, agent=agent)
        except Exception as exc:  # noqa: BLE001
            raise StageError("ris_control", exc) from exc
        agent = res.agent
        state.ppo_curves.append(res.curve)
        for cand in (res.ris, res.best_ris):
            g_cand = stage_beamformer(cfg, ch, cand, state.g, params.ris_beamformer)
            if _better(cfg, ch, cand, g_cand, state.ris, state.g):
                state.ris, state.g = cand, g_cand
        # P3: beamforming
        try:
            wres = woa.woa_optimize(cfg, ch, state.ris, params.woa, seed=seed * 1000 + tau,
                                    init=warm_starts(cfg, model.effective_channels(ch, state.ris),
                                                     state.g))
        except Exception as exc:  # noqa: BLE001
            raise StageError("beamforming", exc) from exc
        if _better(cfg, ch, state.ris, wres.best, state.ris, state.g):
            state.g = wres.best
        _evaluate(cfg, state)
        state.tau = tau
        _record(state, tau)
        if abs(state.objective - prev) <= params.eps_outer * abs(prev):
            break
    return state


# --------------------------------------------------------------------------
# UAV relay baseline
# --------------------------------------------------------------------------


@dataclass
class RelayOutcome:
    rates: np.ndarray          # per UE, bits/s
    relay_power: float         # W consumed by relay transmission (after amplifier efficiency)
    assignment: np.ndarray     # relay index serving each UE (-1: direct only)
    af_sinr: np.ndarray


def af_sinr(gamma1, gamma2):
    """End-to-end amplify-and-forward SINR ``g1*g2 / (g1 + g2 + 1)``."""
    gamma1 = np.asarray(gamma1, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    return gamma1 * gamma2 / (gamma1 + gamma2 + 1.0)


def uav_relay_model(cfg: ScenarioConfig, ch: model.ChannelRealization, g: np.ndarray,
                    relay: RelayParams | None = None) -> RelayOutcome:
    """Half-duplex AF relays, one radio each, sharing power among assigned UEs.

    The relay uses element 0 of the stored BS-ARIS and ARIS-UE channels, so
    relay and ARIS schemes see the same propagation.
    """
    relay = relay or RelayParams()
    p_relay = cfg.p_max if relay.power is None else relay.power
    mu = cfg.amp_efficiency if relay.amp_efficiency is None else relay.amp_efficiency
    g = np.asarray(g, dtype=complex)
    sigma2 = cfg.noise_power
    direct_sinr = model.kernels.sinr_from_effective(ch.direct[None], g[None], sigma2)[0]
    n = ch.bs_aris.shape[0]
    k = g.shape[0]
    h_br = ch.bs_aris[:, 0, :]                    # (N, M)
    h_ru = ch.aris_ue[:, :, 0]                    # (N, K)
    recv = np.abs(h_br @ g.T) ** 2                # (N, K) power of stream k at relay n
    hop1 = recv / (recv.sum(axis=1, keepdims=True) - recv + sigma2)
    # assignment by the best end-to-end SINR at an equal split over all UEs
    trial = af_sinr(hop1, (p_relay / k) * np.abs(h_ru) ** 2 / sigma2)
    assign = np.argmax(trial, axis=0)
    gamma_af = np.zeros(k)
    for r in range(n):
        users = np.flatnonzero(assign == r)
        if users.size == 0 or p_relay <= 0:
            continue
        hop2 = (p_relay / users.size) * np.abs(h_ru[r, users]) ** 2 / sigma2
        gamma_af[users] = af_sinr(hop1[r, users], hop2)
    direct_rate = cfg.bandwidth * np.log2(1.0 + direct_sinr)
    relay_rate = 0.5 * cfg.bandwidth * np.log2(1.0 + direct_sinr + gamma_af)
    rates = np.maximum(direct_rate, relay_rate)
    used = np.unique(assign[relay_rate > direct_rate]) if p_relay > 0 else np.array([], dtype=int)
    power = used.size * (p_relay / mu + relay.circuit_power)
    return RelayOutcome(rates, float(power), np.where(relay_rate > direct_rate, assign, -1), gamma_af)


def relay_power_total(cfg: ScenarioConfig, g: np.ndarray, outcome: RelayOutcome, n_uav: int) -> float:
    g = np.asarray(g)
    return (cfg.zeta * float(np.sum(np.abs(g) ** 2)) + g.shape[0] * cfg.p_circuit
            + outcome.relay_power + model.hover_total(cfg, n_uav))


def _relay_sum_rate(cfg, geom, fading, g, relay) -> float:
    ch = model.build_channels(cfg, geom, fading)
    return float(np.sum(uav_relay_model(cfg, ch, g, relay).rates))


def place_relays(cfg: ScenarioConfig, geom: model.Geometry, fading, g, relay: RelayParams) -> np.ndarray:
    """Pattern search on the relay sum-rate, keeping ``d_min`` separation and the area box."""
    q = geom.aris.copy()
    best = _relay_sum_rate(cfg, geom, fading, g, relay)
    moves = [np.array(d, dtype=float) for d in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    for step in relay.search_steps:
        improved = True
        while improved:
            improved = False
            for i in range(q.shape[0]):
                for mv in moves:
                    cand = q.copy()
                    cand[i, :2] = np.clip(cand[i, :2] + step * mv, 0.0, cfg.area)
                    if not sca.separation_ok(cand, cfg.d_min):
                        continue
                    val = _relay_sum_rate(cfg, geom.with_aris(cand), fading, g, relay)
                    if val > best:
                        q, best, improved = cand, val, True
    return q


def run_relay(cfg: ScenarioConfig, seed: int, params: SolverParams) -> SolutionState:
    state = initial_state(cfg, seed)
    state.kind = "uav_relay"
    off = model.RisControl.all_off(cfg)
    relay = params.relay
    for tau in range(1, 3):
        state.geom = state.geom.with_aris(place_relays(cfg, state.geom, state.fading, state.g, relay))
        ch = state.channels(cfg)
        # BS beamforming on the direct links (first hop uses the same streams)
        wres = woa.woa_optimize(cfg, ch, off, params.woa, seed=seed * 1000 + tau,
                                init=warm_starts(cfg, ch.direct, state.g))
        cand = wres.best
        if (np.sum(uav_relay_model(cfg, ch, cand, relay).rates)
                >= np.sum(uav_relay_model(cfg, ch, state.g, relay).rates)):
            state.g = cand
    ch = state.channels(cfg)
    out = uav_relay_model(cfg, ch, state.g, relay)
    state.ris = off
    state.sum_rate = float(np.sum(out.rates))
    state.power = relay_power_total(cfg, state.g, out, cfg.n_aris)
    state.objective = state.sum_rate / state.power
    rep = model.check_constraints(cfg, ch, off, state.g, state.q)
    state.slacks = rep.as_dict()
    state.slacks["min_rate_slack"] = float(np.min(out.rates - cfg.r_min))
    _record(state, 1)
    return state


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------


def run_random(cfg: ScenarioConfig, seed: int) -> SolutionState:
    ues, fading, rng = scenario_draws(cfg, seed)
    aris = model.random_placement(rng, cfg)
    state = initial_state(cfg, seed, aris=aris, ues=ues, fading=fading)
    state.kind = "random"
    state.ris = model.RisControl.random(rng, cfg, on=True)
    ch = state.channels(cfg)
    state.g = model.mrt_beamformer(model.effective_channels(ch, state.ris), cfg.p_max)
    _evaluate(cfg, state)
    _record(state, 0)
    return state


def run_baseline(kind: str, cfg: ScenarioConfig, seed: int = 0,
                 params: SolverParams | None = None) -> SolutionState:
    params = params or SolverParams()
    if kind == "proposed":
        st = alternating_optimize(cfg, seed, params)
    elif kind == "single_aris":
        ues, fading, _ = scenario_draws(cfg, seed)
        one = cfg.with_(n_aris=1)
        sliced = model.FadingDraws(fading.direct, fading.nlos[:1])
        st = alternating_optimize(one, seed, params, initial_state(one, seed, ues=ues, fading=sliced))
    elif kind == "aris_nps":
        st = alternating_optimize(cfg, seed, params, nps=True)
    elif kind == "random":
        st = run_random(cfg, seed)
    elif kind == "uav_relay":
        st = run_relay(cfg, seed, params)
    else:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
    st.kind = kind
    return st


def dominates_phase_alignment(ch: model.ChannelRealization, ris: model.RisControl, g: np.ndarray,
                              k: int = 0) -> np.ndarray:
    """Wrapped phase offset of every active cascaded term from the direct term of UE ``k``."""
    direct = ch.direct[k] @ g[k]
    coeff = ris.coefficients().reshape(ris.delta.shape)
    terms = coeff * ch.aris_ue[:, k, :] * (ch.bs_aris @ g[k])
    off = np.angle(terms) - np.angle(direct)
    off = (off + math.pi) % (2 * math.pi) - math.pi
    return np.where(ris.delta == 1, np.abs(off), np.nan)
