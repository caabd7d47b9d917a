"""Scenario description and unit helpers.

All quantities inside :class:`ScenarioConfig` are SI (watts, hertz, meters).
dBm/dB conversions happen once, when a config file is loaded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

POWER_MODELS = ("literal", "per_element")
HOVER_ACCOUNTING = ("single", "per_uav")
NOISE_MODES = ("literal", "per_hz")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class UavHoverParams:
    """Rotary-wing hover model parameters."""

    nu: float = 0.012          # profile drag coefficient
    phi: float = 1.225         # air density, kg/m^3
    Lambda: float = 0.05       # rotor solidity
    eta: float = 0.503         # rotor disc area, m^2
    v_a: float = 300.0         # blade angular velocity, rad/s
    rho: float = 0.4           # rotor radius, m
    iota: float = 0.1          # incremental correction factor
    w_tilde: float = 20.0      # aircraft weight, N

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"hover parameter {name} must be > 0, got {value}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Network geometry, physical constants and counts for one scenario."""

    n_ues: int = 12                 # K
    n_aris: int = 4                 # N
    n_elements: int = 10            # I_n, reflective elements per ARIS
    n_antennas: int = 15            # M, BS antennas
    bandwidth: float = 2e6          # W, Hz
    noise_power: float = dbm_to_watt(-174.0)  # sigma^2, W (see noise_mode)
    noise_mode: str = "literal"     # how noise_dbm was read: total or per-Hz
    path_loss_exp: float = 4.0      # alpha
    ref_gain: float = 1e-4          # kappa, linear gain at 1 m
    rician_factor: float = 10.0     # R-hat
    phase_bits: int = 2             # b
    p_max: float = dbm_to_watt(30.0)     # W
    amp_efficiency: float = 0.8          # mu
    p_circuit: float = dbm_to_watt(10.0)  # P_k^cir per UE, W
    p_element: float = dbm_to_watt(10.0)  # P_ARIS, W
    r_min: float = 1e5              # bits/s per UE
    d_min: float = 10.0             # m, minimum ARIS separation
    n_slots: int = 1                # T
    area: float = 100.0             # square side, m
    max_altitude: float = 100.0     # m
    aris_altitude: float = 20.0     # m, hover altitude in fixed-altitude mode
    min_altitude: float = 5.0       # m, lower bound in 3-D mode
    bs_height: float = 25.0         # z_B, m
    direct_loss: float = 1.0        # extra linear attenuation on BS-UE links (blockage)
    beta: float = 1.0               # reflection amplitude
    hover: UavHoverParams = field(default_factory=UavHoverParams)
    power_model: str = "literal"    # "literal": each active element costs I_n * P_ARIS
    hover_accounting: str = "single"
    seed: int = 0

    def __post_init__(self):
        for name in ("n_ues", "n_aris", "n_elements", "n_antennas", "n_slots"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 < self.amp_efficiency <= 1:
            raise ValueError("amp_efficiency must lie in (0, 1]")
        if self.path_loss_exp < 2:
            raise ValueError("path_loss_exp must be >= 2")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        if self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1")
        if not self.p_max > 0:
            raise ValueError("p_max must be > 0")
        if not self.d_min > 0:
            raise ValueError("d_min must be > 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if not 0 < self.direct_loss <= 1:
            raise ValueError("direct_loss must lie in (0, 1]")
        if not 0 < self.aris_altitude <= self.max_altitude:
            raise ValueError("aris_altitude must lie in (0, max_altitude]")
        if self.power_model not in POWER_MODELS:
            raise ValueError(f"power_model must be one of {POWER_MODELS}")
        if self.hover_accounting not in HOVER_ACCOUNTING:
            raise ValueError(f"hover_accounting must be one of {HOVER_ACCOUNTING}")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")

    @property
    def n_phases(self) -> int:
        return 2 ** self.phase_bits

    @property
    def zeta(self) -> float:
        return 1.0 / self.amp_efficiency

    @property
    def bs_position(self) -> np.ndarray:
        return np.array([self.area / 2, self.area / 2, self.bs_height])

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def noise_from_dbm(noise_dbm: float, bandwidth: float, mode: str) -> float:
    """Noise power in watts; ``per_hz`` treats ``noise_dbm`` as a density."""
    if mode == "literal":
        return dbm_to_watt(noise_dbm)
    if mode == "per_hz":
        return dbm_to_watt(noise_dbm) * bandwidth
    raise ValueError(f"unknown noise mode {mode!r}")


def paper_scenario(**overrides) -> ScenarioConfig:
    """Full-size network: 12 UEs, 15 antennas, 4 ARISs with 10 elements."""
    return ScenarioConfig(**overrides)


def desk_scenario(**overrides) -> ScenarioConfig:
    """Laptop-sized network used by the acceptance suite."""
    base = dict(n_ues=4, n_aris=2, n_elements=4, n_antennas=4, phase_bits=2)
    base.update(overrides)
    return ScenarioConfig(**base)
