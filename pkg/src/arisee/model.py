"""Physical-layer model: geometry, channels, SINR, rates, power and energy efficiency.

Conventions
-----------
* Positions are ``(3,)`` arrays ``(x, y, z)`` in meters; UEs sit at ``z = 0``.
* ``g`` is a ``(K, M)`` complex beamformer, row ``k`` is ``g_k``.
* The received amplitude of stream ``l`` at UE ``k`` is ``e_k @ g_l`` (no
  conjugation), where ``e_k`` is the effective channel row of UE ``k``.
* Each ARIS element contributes ``delta * h_nk[i] * beta * exp(j theta) * h_Bn[i, :]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import ScenarioConfig, UavHoverParams


def euclidean_distance(p, q) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def pathloss_amplitude(cfg: ScenarioConfig, d):
    """``sqrt(kappa * d**-alpha)``; raises on non-positive distances."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("link distance must be positive")
    return np.sqrt(cfg.ref_gain * d ** (-cfg.path_loss_exp))


def steering_vector(n: int, cos_angle: float) -> np.ndarray:
    """Half-wavelength ULA response ``exp(j*pi*m*cos(angle))``, ``m = 0..n-1``."""
    return np.exp(1j * np.pi * np.arange(n) * cos_angle)


def _cos_x(src, dst) -> float:
    diff = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    d = np.linalg.norm(diff)
    if d <= 0:
        raise ValueError("link distance must be positive")
    return diff[0] / d


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------


@dataclass
class Geometry:
    bs: np.ndarray      # (3,)
    ues: np.ndarray     # (K, 3)
    aris: np.ndarray    # (N, 3)

    def with_aris(self, aris) -> "Geometry":
        return Geometry(self.bs.copy(), self.ues.copy(), np.array(aris, dtype=float))


def sample_ue_positions(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    xy = rng.uniform(0.0, cfg.area, size=(cfg.n_ues, 2))
    return np.column_stack([xy, np.zeros(cfg.n_ues)])


def circle_placement(cfg: ScenarioConfig, n: int | None = None) -> np.ndarray:
    """ARISs evenly spaced on a circle of radius area/4 around the BS."""
    n = cfg.n_aris if n is None else n
    angles = 2 * np.pi * np.arange(n) / n + np.pi / 4
    r = cfg.area / 4
    bs = cfg.bs_position
    xy = bs[:2] + r * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.column_stack([xy, np.full(n, cfg.aris_altitude)])


def random_placement(rng: np.random.Generator, cfg: ScenarioConfig, n: int | None = None,
                     max_tries: int = 1000) -> np.ndarray:
    """Uniform placement at the hover altitude honoring ``d_min`` by rejection."""
    n = cfg.n_aris if n is None else n
    pts: list[np.ndarray] = []
    for _ in range(max_tries * n):
        p = np.array([*rng.uniform(0.0, cfg.area, size=2), cfg.aris_altitude])
        if all(np.linalg.norm(p - q) >= cfg.d_min for q in pts):
            pts.append(p)
            if len(pts) == n:
                return np.array(pts)
    raise RuntimeError("could not place ARISs with the requested separation")


def make_geometry(rng: np.random.Generator, cfg: ScenarioConfig, aris=None) -> Geometry:
    ues = sample_ue_positions(rng, cfg)
    aris = circle_placement(cfg) if aris is None else np.asarray(aris, dtype=float)
    return Geometry(cfg.bs_position, ues, aris)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


@dataclass
class FadingDraws:
    """Unit-variance small-scale components, kept fixed while ARISs move."""

    direct: np.ndarray   # (K, M)
    nlos: np.ndarray     # (N, K, I)


@dataclass
class ChannelRealization:
    direct: np.ndarray     # H_Bk, (K, M)
    bs_aris: np.ndarray    # h_Bn, (N, I, M)
    aris_ue: np.ndarray    # h_nk, (N, K, I)

    @property
    def shape(self):
        n, i, m = self.bs_aris.shape
        return self.direct.shape[0], n, i, m

    def cascade_tensor(self) -> np.ndarray:
        """``T[n*I + i, k, :] = h_nk[i] * h_Bn[i, :]`` with shape ``(N*I, K, M)``."""
        n, k, i = self.aris_ue.shape
        t = self.aris_ue.transpose(0, 2, 1)[:, :, :, None] * self.bs_aris[:, :, None, :]
        return t.reshape(n * i, k, self.bs_aris.shape[2])


def draw_fading(rng: np.random.Generator, cfg: ScenarioConfig, n_aris: int | None = None) -> FadingDraws:
    n = cfg.n_aris if n_aris is None else n_aris
    return FadingDraws(
        direct=complex_normal(rng, (cfg.n_ues, cfg.n_antennas)),
        nlos=complex_normal(rng, (n, cfg.n_ues, cfg.n_elements)),
    )


def sample_direct_channel(rng: np.random.Generator, cfg: ScenarioConfig, d_bk: float) -> np.ndarray:
    """Rayleigh BS-UE row of length M."""
    amp = pathloss_amplitude(cfg, d_bk) * math.sqrt(cfg.direct_loss)
    return amp * complex_normal(rng, cfg.n_antennas)


def los_factor(cfg: ScenarioConfig) -> float:
    r = cfg.rician_factor
    return 1.0 if math.isinf(r) else math.sqrt(r / (1.0 + r))


def nlos_factor(cfg: ScenarioConfig) -> float:
    r = cfg.rician_factor
    return 0.0 if math.isinf(r) else math.sqrt(1.0 / (1.0 + r))


def bs_aris_los(cfg: ScenarioConfig, bs, aris) -> np.ndarray:
    """Unit-modulus ``(I, M)`` LoS array response between the BS and one ARIS."""
    arr = steering_vector(cfg.n_elements, _cos_x(aris, bs))
    dep = steering_vector(cfg.n_antennas, _cos_x(bs, aris))
    return np.outer(arr, dep)


def sample_bs_aris_channel(rng, cfg: ScenarioConfig, bs, aris) -> np.ndarray:
    """Pure-LoS BS-ARIS channel; ``rng`` is unused (the link is deterministic)."""
    amp = pathloss_amplitude(cfg, euclidean_distance(bs, aris))
    return amp * los_factor(cfg) * bs_aris_los(cfg, bs, aris)


def sample_aris_ue_channel(rng: np.random.Generator, cfg: ScenarioConfig, aris, ue,
                           nlos: np.ndarray | None = None) -> np.ndarray:
    """Rician ARIS-UE row of length I_n."""
    amp = pathloss_amplitude(cfg, euclidean_distance(aris, ue))
    los = steering_vector(cfg.n_elements, _cos_x(aris, ue))
    if nlos is None:
        nlos = complex_normal(rng, cfg.n_elements)
    return amp * (los_factor(cfg) * los + nlos_factor(cfg) * nlos)


def build_channels(cfg: ScenarioConfig, geom: Geometry, fading: FadingDraws) -> ChannelRealization:
    """Deterministic channels for a geometry and a fixed set of fading draws."""
    k = geom.ues.shape[0]
    n = geom.aris.shape[0]
    d_bk = np.linalg.norm(geom.ues - geom.bs, axis=1)
    direct = (pathloss_amplitude(cfg, d_bk) * math.sqrt(cfg.direct_loss))[:, None] * fading.direct
    bs_aris = np.empty((n, cfg.n_elements, cfg.n_antennas), dtype=complex)
    aris_ue = np.empty((n, k, cfg.n_elements), dtype=complex)
    for a in range(n):
        bs_aris[a] = sample_bs_aris_channel(None, cfg, geom.bs, geom.aris[a])
        for u in range(k):
            aris_ue[a, u] = sample_aris_ue_channel(None, cfg, geom.aris[a], geom.ues[u],
                                                   nlos=fading.nlos[a, u])
    return ChannelRealization(direct, bs_aris, aris_ue)


def sample_channels(rng: np.random.Generator, cfg: ScenarioConfig, geom: Geometry):
    fading = draw_fading(rng, cfg, geom.aris.shape[0])
    return build_channels(cfg, geom, fading), fading


# --------------------------------------------------------------------------
# RIS control
# --------------------------------------------------------------------------


def quantize_phase(phi_idx: int, b_bits: int) -> float:
    levels = 2 ** int(b_bits)
    if not 0 <= int(phi_idx) < levels or int(phi_idx) != phi_idx:
        raise ValueError(f"phase index {phi_idx} outside [0, {levels})")
    return 2.0 * math.pi * int(phi_idx) / levels


@dataclass
class RisControl:
    """On/off states, quantized phase indices and amplitudes for every element."""

    delta: np.ndarray          # (N, I) in {0, 1}
    phase_idx: np.ndarray      # (N, I) in [0, 2**b)
    phase_bits: int
    beta: np.ndarray = field(default=None)  # (N, I) in [0, 1]

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.int8)
        self.phase_idx = np.asarray(self.phase_idx, dtype=np.int64)
        if self.beta is None:
            self.beta = np.ones(self.delta.shape)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.delta.shape != self.phase_idx.shape or self.delta.shape != self.beta.shape:
            raise ValueError("delta, phase_idx and beta must share a shape")
        if not np.all((self.delta == 0) | (self.delta == 1)):
            raise ValueError("delta entries must be 0 or 1")
        if np.any(self.phase_idx < 0) or np.any(self.phase_idx >= 2 ** self.phase_bits):
            raise ValueError("phase index out of range")
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise ValueError("beta entries must lie in [0, 1]")

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * self.phase_idx / (2 ** self.phase_bits)

    @property
    def n_aris(self) -> int:
        return self.delta.shape[0]

    def coefficients(self) -> np.ndarray:
        """Per-element reflection ``delta * beta * exp(j theta)``, flattened to ``(N*I,)``."""
        return (self.delta * self.beta * np.exp(1j * self.theta)).ravel()

    def copy(self) -> "RisControl":
        return RisControl(self.delta.copy(), self.phase_idx.copy(), self.phase_bits, self.beta.copy())

    @classmethod
    def all_on(cls, cfg: ScenarioConfig, n_aris: int | None = None) -> "RisControl":
        n = cfg.n_aris if n_aris is None else n_aris
        shape = (n, cfg.n_elements)
        return cls(np.ones(shape), np.zeros(shape), cfg.phase_bits, np.full(shape, cfg.beta))

    @classmethod
    def all_off(cls, cfg: ScenarioConfig, n_aris: int | None = None) -> "RisControl":
        ris = cls.all_on(cfg, n_aris)
        ris.delta[:] = 0
        return ris

    @classmethod
    def random(cls, rng: np.random.Generator, cfg: ScenarioConfig, n_aris: int | None = None,
               on: bool = True) -> "RisControl":
        n = cfg.n_aris if n_aris is None else n_aris
        shape = (n, cfg.n_elements)
        delta = np.ones(shape) if on else rng.integers(0, 2, size=shape)
        return cls(delta, rng.integers(0, cfg.n_phases, size=shape), cfg.phase_bits,
                   np.full(shape, cfg.beta))


# --------------------------------------------------------------------------
# SINR, rates, power
# --------------------------------------------------------------------------


def effective_channels(ch: ChannelRealization, ris: RisControl) -> np.ndarray:
    """All effective channel rows, ``(K, M)``."""
    if not np.any(ris.delta):
        return ch.direct.copy()
    return kernels.effective_channels(ch.direct, ch.cascade_tensor(), ris.coefficients()[None, :])[0]


def effective_channel(ch: ChannelRealization, ris: RisControl, k: int) -> np.ndarray:
    return effective_channels(ch, ris)[k]


def sinr_all(ch: ChannelRealization, ris: RisControl, g: np.ndarray, sigma2: float) -> np.ndarray:
    eff = effective_channels(ch, ris)
    return kernels.sinr_from_effective(eff[None], np.asarray(g, dtype=complex)[None], sigma2)[0]


def sinr(ch: ChannelRealization, ris: RisControl, g: np.ndarray, k: int, sigma2: float) -> float:
    return float(sinr_all(ch, ris, g, sigma2)[k])


def rate(cfg: ScenarioConfig, sinr_val):
    sinr_val = np.asarray(sinr_val, dtype=float)
    if np.any(sinr_val < 0):
        raise ValueError("SINR must be non-negative")
    return cfg.bandwidth * np.log2(1.0 + sinr_val)


def user_rates(cfg: ScenarioConfig, ch: ChannelRealization, ris: RisControl, g) -> np.ndarray:
    return rate(cfg, sinr_all(ch, ris, g, cfg.noise_power))


def sum_rate(cfg: ScenarioConfig, ch: ChannelRealization, ris: RisControl, g) -> float:
    return float(np.sum(user_rates(cfg, ch, ris, g)))


def hover_power(p: UavHoverParams) -> float:
    """Rotary-wing hover power: blade-profile term plus induced term."""
    for name, value in p.__dict__.items():
        if not value > 0:
            raise ValueError(f"hover parameter {name} must be > 0")
    blade = (p.nu / 8.0) * p.phi * p.Lambda * p.eta * p.v_a ** 3 * p.rho
    induced = (1.0 + p.iota) * p.w_tilde ** 1.5 / math.sqrt(2.0 * p.phi * p.eta)
    return blade + induced


def element_power(cfg: ScenarioConfig, delta: np.ndarray) -> float:
    """Circuit power of the active reflective elements."""
    delta = np.asarray(delta)
    active = float(np.sum(delta))
    if cfg.power_model == "literal":
        return active * delta.shape[-1] * cfg.p_element
    return active * cfg.p_element


def hover_total(cfg: ScenarioConfig, n_uav: int) -> float:
    if n_uav == 0:
        return 0.0
    p = hover_power(cfg.hover)
    return p if cfg.hover_accounting == "single" else n_uav * p


def total_power(cfg: ScenarioConfig, ris: RisControl, g) -> float:
    g = np.asarray(g)
    tx = cfg.zeta * float(np.sum(np.abs(g) ** 2)) + g.shape[0] * cfg.p_circuit
    return tx + element_power(cfg, ris.delta) + hover_total(cfg, ris.n_aris)


def energy_efficiency(cfg: ScenarioConfig, ch_per_slot, ris, g) -> float:
    """Time-averaged ``R[t] / P[t]`` in bits/joule.

    ``ch_per_slot`` may be a single realization or a sequence; ``ris`` and ``g``
    may be shared or given per slot.
    """
    if isinstance(ch_per_slot, ChannelRealization):
        ch_per_slot = [ch_per_slot]
    n = len(ch_per_slot)
    ris_seq = ris if isinstance(ris, (list, tuple)) else [ris] * n
    g_seq = g if isinstance(g, (list, tuple)) else [g] * n
    total = 0.0
    for ch, r, gg in zip(ch_per_slot, ris_seq, g_seq):
        p = total_power(cfg, r, gg)
        if not p > 0:
            raise ValueError("total power must be positive")
        total += sum_rate(cfg, ch, r, gg) / p
    return total / n


def mrt_beamformer(eff: np.ndarray, p_max: float, powers=None) -> np.ndarray:
    """Maximum-ratio directions ``conj(e_k)/|e_k|``, equal power split by default."""
    eff = np.asarray(eff, dtype=complex)
    k = eff.shape[0]
    powers = np.full(k, p_max / k) if powers is None else np.asarray(powers, dtype=float)
    norms = np.linalg.norm(eff, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return np.sqrt(powers)[:, None] * np.conj(eff) / norms[:, None]


def rzf_beamformer(eff: np.ndarray, p_max: float, sigma2: float) -> np.ndarray:
    """Regularized zero-forcing ``H^H (H H^H + (K sigma^2 / P) I)^-1`` scaled to ``p_max``.

    Rows of the result are the per-UE beamformers ``g_k``, so ``eff @ g.T`` is
    close to diagonal. ``eff`` may carry leading batch axes ``(..., K, M)``.
    """
    eff = np.asarray(eff, dtype=complex)
    k = eff.shape[-2]
    eff_h = np.conj(np.swapaxes(eff, -1, -2))
    gram = eff @ eff_h
    trace = np.real(np.trace(gram, axis1=-2, axis2=-1))
    # scale-aware floor keeps the solve well posed for rank-deficient channels
    reg = np.maximum(k * sigma2 / p_max, 1e-12 * trace / k)[..., None, None]
    w = eff_h @ np.linalg.solve(gram + reg * np.eye(k), np.broadcast_to(np.eye(k), gram.shape))
    g = np.swapaxes(w, -1, -2)
    power = np.sum(np.abs(g) ** 2, axis=(-2, -1), keepdims=True)
    return g * np.sqrt(p_max / np.where(power > 0, power, 1.0))


# --------------------------------------------------------------------------
# constraints
# --------------------------------------------------------------------------


@dataclass
class ConstraintReport:
    rate_slack: np.ndarray          # r_k - r_min, per UE
    phase_ok: bool
    separation_slack: np.ndarray    # |q_i - q_j|^2 - d_min^2, per pair
    power_slack: float              # P_max - tr(g^H g)
    binary_ok: bool
    tol: float = 1e-9

    @property
    def rate_ok(self) -> bool:
        return bool(np.all(self.rate_slack >= -self.tol * max(1.0, np.max(np.abs(self.rate_slack), initial=1.0))))

    @property
    def separation_ok(self) -> bool:
        return bool(np.all(self.separation_slack >= -self.tol))

    @property
    def power_ok(self) -> bool:
        return self.power_slack >= -self.tol

    @property
    def ok(self) -> bool:
        return self.rate_ok and self.phase_ok and self.separation_ok and self.power_ok and self.binary_ok

    @property
    def hard_ok(self) -> bool:
        """Everything except the QoS rate requirement."""
        return self.phase_ok and self.separation_ok and self.power_ok and self.binary_ok

    def as_dict(self) -> dict:
        return {
            "min_rate_slack": float(np.min(self.rate_slack)) if self.rate_slack.size else 0.0,
            "min_separation_slack": float(np.min(self.separation_slack)) if self.separation_slack.size else 0.0,
            "power_slack": float(self.power_slack),
            "phase_ok": bool(self.phase_ok),
            "binary_ok": bool(self.binary_ok),
        }


def pairwise_sq_distances(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    out = [float(np.sum((points[i] - points[j]) ** 2)) for i in range(n) for j in range(i + 1, n)]
    return np.array(out)


def check_constraints(cfg: ScenarioConfig, ch: ChannelRealization, ris: RisControl, g, aris,
                      tol: float = 1e-9) -> ConstraintReport:
    """Evaluate the QoS, phase, separation, power and binary constraints."""
    g = np.asarray(g, dtype=complex)
    rates = user_rates(cfg, ch, ris, g)
    theta = ris.theta
    phase_ok = bool(np.all((theta >= 0) & (theta < 2 * np.pi)))
    sep = pairwise_sq_distances(aris) - cfg.d_min ** 2
    power_slack = cfg.p_max - float(np.real(np.trace(g.conj().T @ g)))
    binary_ok = bool(np.all((ris.delta == 0) | (ris.delta == 1)))
    return ConstraintReport(rates - cfg.r_min, phase_ok, sep, power_slack * 1.0, binary_ok,
                            tol=tol)
