"""Whale optimization for BS beamforming / power control.

The generic minimizer :func:`minimize` works on any batched fitness function.
:func:`woa_optimize` wraps it with the beamformer encoding, the power-budget
projection and the penalized energy-efficiency fitness.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels, model
from .config import ScenarioConfig

MODES = ("full", "mrt_power")
ORIENTATIONS = ("violation", "literal")


@dataclass
class WoaParams:
    population: int = 30            # U
    max_iter: int = 200             # j_max
    b_spiral: float = 1.0
    varpi: float | None = None      # penalty factor; None -> 1e6 / r_min**2
    mode: str = "full"              # "full": 2*K*M reals; "mrt_power": K powers on MRT directions
    penalty_orientation: str = "violation"  # "literal" penalizes satisfied constraints

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.varpi is not None and not self.varpi > 0:
            raise ValueError("varpi must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.penalty_orientation not in ORIENTATIONS:
            raise ValueError(f"penalty_orientation must be one of {ORIENTATIONS}")


@dataclass
class WoaResult:
    best: np.ndarray          # best position (or decoded beamformer in woa_optimize)
    fitness: float
    trace: list               # best-so-far fitness after each iteration (index 0 = initial)
    branch_counts: dict


# --------------------------------------------------------------------------
# update rules
# --------------------------------------------------------------------------


def coefficients(a_ctrl: float, rng: np.random.Generator | None = None, r1=None, r2=None,
                 shape=()):
    """``A = 2a r1 - a``, ``C = 2 r2``, ``l ~ U[-1, 1]``, ``p ~ U[0, 1]``."""
    if not 0 <= a_ctrl <= 2:
        raise ValueError("a_ctrl must lie in [0, 2]")
    rng = np.random.default_rng() if rng is None else rng
    r1 = rng.random(shape) if r1 is None else np.asarray(r1, dtype=float)
    r2 = rng.random(shape) if r2 is None else np.asarray(r2, dtype=float)
    a_vec = 2.0 * a_ctrl * r1 - a_ctrl
    c_vec = 2.0 * r2
    l = rng.uniform(-1.0, 1.0, shape)
    p = rng.random(shape)
    return a_vec, c_vec, l, p


def encircle_update(whale, best, A, C):
    whale = np.asarray(whale, dtype=float)
    best = np.asarray(best, dtype=float)
    d = np.abs(C * best - whale)
    return best - A * d


def spiral_update(whale, best, l, b_spiral: float = 1.0):
    whale = np.asarray(whale, dtype=float)
    best = np.asarray(best, dtype=float)
    d = np.abs(best - whale)
    return d * np.exp(b_spiral * l) * np.cos(2.0 * np.pi * l) + best


def explore_update(whale, random_whale, A, C):
    whale = np.asarray(whale, dtype=float)
    rand = np.asarray(random_whale, dtype=float)
    d = np.abs(C * rand - whale)
    return rand - A * d


def branch(p, A) -> str:
    """Update rule chosen for one whale."""
    if p < 0.5:
        return "encircle" if np.all(np.abs(A) < 1) else "explore"
    return "spiral"


# --------------------------------------------------------------------------
# generic minimizer
# --------------------------------------------------------------------------


def minimize(fitness: Callable[[np.ndarray], np.ndarray], init: np.ndarray,
             params: WoaParams | None = None, rng: np.random.Generator | None = None,
             project: Callable[[np.ndarray], np.ndarray] | None = None) -> WoaResult:
    """Minimize a batched ``fitness`` (rows are candidates) starting from population ``init``.

    The best-so-far position is stored outside the population, so the recorded
    trace never increases.
    """
    params = params or WoaParams()
    rng = np.random.default_rng(0) if rng is None else rng
    project = project or (lambda x: x)
    pop = project(np.array(init, dtype=float))
    u = pop.shape[0]
    fit = fitness(pop)
    i = int(np.argmin(fit))
    best, best_fit = pop[i].copy(), float(fit[i])
    trace = [best_fit]
    counts = {"encircle": 0, "explore": 0, "spiral": 0}
    for it in range(params.max_iter):
        a_ctrl = 2.0 - 2.0 * it / params.max_iter
        A, C, l, p = coefficients(a_ctrl, rng, shape=(u, 1))
        enc = (p[:, 0] < 0.5) & (np.abs(A[:, 0]) < 1)
        exp_ = (p[:, 0] < 0.5) & ~enc
        spi = p[:, 0] >= 0.5
        counts["encircle"] += int(enc.sum())
        counts["explore"] += int(exp_.sum())
        counts["spiral"] += int(spi.sum())
        rand = pop[rng.integers(0, u, size=u)]
        new = np.where(enc[:, None], encircle_update(pop, best, A, C), 0.0)
        new = np.where(exp_[:, None], explore_update(pop, rand, A, C), new)
        new = np.where(spi[:, None], spiral_update(pop, best, l, params.b_spiral), new)
        pop = project(new)
        fit = fitness(pop)
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best, best_fit = pop[i].copy(), float(fit[i])
        trace.append(best_fit)
    return WoaResult(best, best_fit, trace, counts)


# --------------------------------------------------------------------------
# beamformer encoding and fitness
# --------------------------------------------------------------------------


def project_power(g, p_max: float) -> np.ndarray:
    """Scale ``g`` (or a batch of them) so that ``tr(g^H g) <= p_max``."""
    g = np.asarray(g)
    power = np.sum(np.abs(g) ** 2, axis=(-2, -1), keepdims=True)
    scale = np.where(power > p_max, np.sqrt(p_max / np.where(power > 0, power, 1.0)), 1.0)
    return g * scale


def encode_beamformer(g) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    return np.concatenate([g.real.ravel(), g.imag.ravel()])


def decode_beamformer(x, k: int, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    half = k * m
    re = x[..., :half].reshape(x.shape[:-1] + (k, m))
    im = x[..., half:].reshape(x.shape[:-1] + (k, m))
    return re + 1j * im


def penalty_weight(cfg: ScenarioConfig, params: WoaParams) -> float:
    if params.varpi is not None:
        return params.varpi
    return 1e6 / max(cfg.r_min, 1.0) ** 2


class BeamformerFitness:
    """Batched ``-R/P + varpi * sum_k F_k f_k**2`` for fixed channels and RIS control."""

    def __init__(self, cfg: ScenarioConfig, ch: model.ChannelRealization, ris: model.RisControl,
                 params: WoaParams):
        self.cfg = cfg
        self.params = params
        self.eff = model.effective_channels(ch, ris)
        self.k, self.m = self.eff.shape
        self.static = (self.k * cfg.p_circuit + model.element_power(cfg, ris.delta)
                       + model.hover_total(cfg, ris.n_aris))
        self.varpi = penalty_weight(cfg, params)
        norms = np.linalg.norm(self.eff, axis=1)
        self.mrt_dirs = np.conj(self.eff) / np.where(norms > 0, norms, 1.0)[:, None]

    # position <-> beamformer
    @property
    def dim(self) -> int:
        return 2 * self.k * self.m if self.params.mode == "full" else self.k

    def decode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.params.mode == "full":
            return decode_beamformer(x, self.k, self.m)
        return np.sqrt(np.maximum(x, 0.0))[..., None] * self.mrt_dirs

    def encode(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=complex)
        if self.params.mode == "full":
            return encode_beamformer(g)
        return np.sum(np.abs(g) ** 2, axis=1)

    def project(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.params.mode == "full":
            g = project_power(self.decode(x), self.cfg.p_max)
            return np.concatenate([g.real.reshape(len(x), -1), g.imag.reshape(len(x), -1)], axis=1)
        p = np.abs(x)
        total = p.sum(axis=1, keepdims=True)
        return np.where(total > self.cfg.p_max, p * self.cfg.p_max / np.where(total > 0, total, 1.0), p)

    # evaluation
    def rates(self, g_batch) -> np.ndarray:
        sinr = kernels.sinr_from_effective(self.eff[None], np.asarray(g_batch, dtype=complex),
                                           self.cfg.noise_power)
        return self.cfg.bandwidth * np.log2(1.0 + sinr)

    def power(self, g_batch) -> np.ndarray:
        return self.cfg.zeta * np.sum(np.abs(g_batch) ** 2, axis=(1, 2)) + self.static

    def penalty(self, rates) -> np.ndarray:
        f = self.cfg.r_min - rates
        if self.params.penalty_orientation == "violation":
            active = f > 0
        else:
            active = f < 0
        return self.varpi * np.sum(np.where(active, f ** 2, 0.0), axis=1)

    def ee(self, g_batch) -> np.ndarray:
        return self.rates(g_batch).sum(axis=1) / self.power(g_batch)

    def __call__(self, x) -> np.ndarray:
        g = self.decode(np.atleast_2d(x))
        rates = self.rates(g)
        return -rates.sum(axis=1) / self.power(g) + self.penalty(rates)


def penalty_fitness(cfg: ScenarioConfig, ch: model.ChannelRealization, ris: model.RisControl, g,
                    params: WoaParams | None = None) -> float:
    params = params or WoaParams()
    fit = BeamformerFitness(cfg, ch, ris, WoaParams(**{**params.__dict__, "mode": "full"}))
    return float(fit(encode_beamformer(g))[0])


def initial_population(fit: BeamformerFitness, params: WoaParams, rng: np.random.Generator,
                       seeds=()) -> np.ndarray:
    """Uniform draws within the power budget, with optional warm-start candidates first."""
    cfg = fit.cfg
    if params.mode == "full":
        half = np.sqrt(cfg.p_max / (fit.k * fit.m))
        pop = rng.uniform(-half, half, size=(params.population, fit.dim))
    else:
        pop = rng.uniform(0.0, cfg.p_max / fit.k, size=(params.population, fit.dim))
    for i, g in enumerate(list(seeds)[:params.population]):
        pop[i] = fit.encode(g)
    return fit.project(pop)


def woa_optimize(cfg: ScenarioConfig, ch: model.ChannelRealization, ris: model.RisControl,
                 params: WoaParams | None = None, seed: int = 0, init=()) -> WoaResult:
    """Search the beamformer that minimizes the penalized fitness.

    ``init`` holds warm-start beamformers placed at the head of the population.
    The returned ``best`` is the decoded ``(K, M)`` beamformer.
    """
    params = params or WoaParams()
    rng = np.random.default_rng(seed)
    fit = BeamformerFitness(cfg, ch, ris, params)
    pop = initial_population(fit, params, rng, init)
    res = minimize(fit, pop, params, rng, fit.project)
    g = project_power(fit.decode(res.best[None])[0], cfg.p_max)
    return WoaResult(g, res.fitness, res.trace, res.branch_counts)
