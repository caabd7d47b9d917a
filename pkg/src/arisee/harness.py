"""Experiment configuration, seeded sweeps, result files and summary statistics.

Config files are YAML with physical units in the key names (``p_max_dbm``,
``bandwidth_hz``). Conversion to SI happens once in :func:`load_config`.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__, altopt, ppo, sca, woa
from .config import (ScenarioConfig, UavHoverParams, db_to_linear, dbm_to_watt, desk_scenario,
                     linear_to_db, noise_from_dbm, paper_scenario, watt_to_dbm)

SCHEMA_VERSION = 1
PRESETS = ("paper", "desk")
FORMATS = ("csv", "json")
SWEEP_VARIABLES = ("p_max_dbm", "n_aris", "n_elements", "n_ues")

# column order of the tabular result file
COLUMNS = ("schema_version", "run_id", "baseline", "seed", "variable", "value", "status",
           "sum_rate_bps", "ee_bits_per_joule", "total_power_w", "min_rate_slack_bps",
           "separation_slack_m2", "power_slack_w", "phase_ok", "binary_ok", "tau",
           "config_hash", "code_version", "trace_ref")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


# --------------------------------------------------------------------------
# unit-keyed file representation
# --------------------------------------------------------------------------


def _exact_inverse(value: float, forward, backward) -> float:
    """A float ``y`` near ``backward(value)`` with ``forward(y) == value`` when one exists.

    Keeps dBm/dB keys lossless across save/load.
    """
    y = backward(value)
    if forward(y) == value:
        return y
    lo = hi = y
    for _ in range(64):
        lo, hi = np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)
        for cand in (float(lo), float(hi)):
            if forward(cand) == value:
                return cand
    return y


def _to_dbm(w):
    return _exact_inverse(w, dbm_to_watt, watt_to_dbm)


def _to_db(x):
    return _exact_inverse(x, db_to_linear, linear_to_db)


# (file key, field, to-SI, from-SI)
_SCENARIO_KEYS = (
    ("n_ues", "n_ues", int, int),
    ("n_aris", "n_aris", int, int),
    ("n_elements", "n_elements", int, int),
    ("n_antennas", "n_antennas", int, int),
    ("bandwidth_hz", "bandwidth", float, float),
    ("path_loss_exp", "path_loss_exp", float, float),
    ("ref_gain_db", "ref_gain", db_to_linear, _to_db),
    ("rician_factor", "rician_factor", float, float),
    ("phase_bits", "phase_bits", int, int),
    ("p_max_dbm", "p_max", dbm_to_watt, _to_dbm),
    ("amp_efficiency", "amp_efficiency", float, float),
    ("p_circuit_dbm", "p_circuit", dbm_to_watt, _to_dbm),
    ("p_element_dbm", "p_element", dbm_to_watt, _to_dbm),
    ("r_min_bps", "r_min", float, float),
    ("d_min_m", "d_min", float, float),
    ("n_slots", "n_slots", int, int),
    ("area_m", "area", float, float),
    ("max_altitude_m", "max_altitude", float, float),
    ("aris_altitude_m", "aris_altitude", float, float),
    ("min_altitude_m", "min_altitude", float, float),
    ("bs_height_m", "bs_height", float, float),
    ("direct_loss_db", "direct_loss", db_to_linear, _to_db),
    ("beta", "beta", float, float),
    ("power_model", "power_model", str, str),
    ("hover_accounting", "hover_accounting", str, str),
)

_HOVER_KEYS = (
    ("nu", "nu"), ("phi_kg_m3", "phi"), ("Lambda", "Lambda"), ("eta_m2", "eta"),
    ("v_a_rad_s", "v_a"), ("rho_m", "rho"), ("iota", "iota"), ("w_tilde_n", "w_tilde"),
)

# solver fields that carry a unit get it appended to the key
_SOLVER_UNITS = {
    "sca": {"trust_radius": "_m", "min_trust": "_m"},
    "relay": {"power": "_w", "circuit_power": "_w", "search_steps": "_m"},
}


def _check_keys(data: dict, allowed, section: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", section)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError("unknown key", f"{section}.{unknown[0]}" if section else unknown[0])


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    out = {fkey: back(getattr(sc, attr)) for fkey, attr, _, back in _SCENARIO_KEYS}
    # noise is stored as the dBm figure in the reading that produced it
    per = sc.bandwidth if sc.noise_mode == "per_hz" else 1.0
    out["noise_dbm"] = _exact_inverse(sc.noise_power, lambda d: noise_from_dbm(d, sc.bandwidth, sc.noise_mode),
                                      lambda w: watt_to_dbm(w / per))
    out["noise_mode"] = sc.noise_mode
    out["hover"] = {fkey: float(getattr(sc.hover, attr)) for fkey, attr in _HOVER_KEYS}
    return out


def scenario_from_dict(data: dict, base: ScenarioConfig) -> ScenarioConfig:
    keys = [k for k, *_ in _SCENARIO_KEYS] + ["noise_dbm", "noise_mode", "hover"]
    _check_keys(data, keys, "scenario")
    kwargs = {}
    for fkey, attr, conv, _ in _SCENARIO_KEYS:
        if fkey in data:
            try:
                kwargs[attr] = conv(data[fkey])
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), f"scenario.{fkey}") from exc
    mode = data.get("noise_mode", base.noise_mode)
    bandwidth = kwargs.get("bandwidth", base.bandwidth)
    if "noise_dbm" in data:
        try:
            kwargs["noise_power"] = noise_from_dbm(float(data["noise_dbm"]), bandwidth, mode)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "scenario.noise_dbm") from exc
    elif mode != base.noise_mode:
        raise ConfigError("noise_mode changed without noise_dbm", "scenario.noise_mode")
    kwargs["noise_mode"] = mode
    if "hover" in data:
        _check_keys(data["hover"], [k for k, _ in _HOVER_KEYS], "scenario.hover")
        hv = dataclasses.asdict(base.hover)
        for fkey, attr in _HOVER_KEYS:
            if fkey in data["hover"]:
                hv[attr] = float(data["hover"][fkey])
        try:
            kwargs["hover"] = UavHoverParams(**hv)
        except ValueError as exc:
            raise ConfigError(str(exc), "scenario.hover") from exc
    try:
        return dataclasses.replace(base, **kwargs)
    except ValueError as exc:
        msg = str(exc)
        attr = msg.split()[0]
        fkey = next((k for k, a, *_ in _SCENARIO_KEYS if a == attr), attr)
        raise ConfigError(msg, f"scenario.{fkey}") from exc


def _params_to_dict(obj, section: str) -> dict:
    units = _SOLVER_UNITS.get(section, {})
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        out[f.name + units.get(f.name, "")] = list(v) if isinstance(v, tuple) else v
    return out


def _params_from_dict(cls, data: dict, section: str, base=None):
    units = _SOLVER_UNITS.get(section, {})
    names = {f.name + units.get(f.name, ""): f.name for f in dataclasses.fields(cls)}
    _check_keys(data, names, f"solver.{section}")
    kwargs = dataclasses.asdict(base) if base is not None else {}
    for key, value in data.items():
        prev = kwargs.get(names[key])
        if isinstance(value, list):
            value = tuple(value)
        elif isinstance(prev, float) and isinstance(value, (int, str)) and not isinstance(value, bool):
            # YAML 1.1 reads "2e-3" as a string
            try:
                value = float(value)
            except ValueError as exc:
                raise ConfigError("expected a number", f"solver.{section}.{key}") from exc
        kwargs[names[key]] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"solver.{section}") from exc


# --------------------------------------------------------------------------
# experiment config
# --------------------------------------------------------------------------


@dataclass
class SweepSpec:
    variable: str = "p_max_dbm"
    values: list = field(default_factory=lambda: [30.0])

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"must be one of {SWEEP_VARIABLES}", "sweep.variable")
        if not self.values:
            raise ConfigError("must be non-empty", "sweep.values")
        vals = [float(v) for v in self.values]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("must be strictly increasing", "sweep.values")
        if self.variable != "p_max_dbm":
            if any(v != int(v) or v < 1 for v in vals):
                raise ConfigError("counts must be positive integers", "sweep.values")
            self.values = [int(v) for v in vals]
        else:
            self.values = vals

    def apply(self, sc: ScenarioConfig, value) -> ScenarioConfig:
        if self.variable == "p_max_dbm":
            return sc.with_(p_max=dbm_to_watt(value))
        return sc.with_(**{self.variable: int(value)})


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=paper_scenario)
    solver: altopt.SolverParams = field(default_factory=altopt.SolverParams)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    baselines: list = field(default_factory=lambda: ["proposed"])
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    output_format: str = "csv"
    preset: str = "paper"
    workers: int = 1

    def __post_init__(self):
        for b in self.baselines:
            if b not in altopt.BASELINES:
                raise ConfigError(f"unknown baseline {b!r}", "baselines")
        if len(set(self.baselines)) != len(self.baselines):
            raise ConfigError("duplicate baseline", "baselines")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("must be a non-empty list of distinct integers", "seeds")
        if self.output_format not in FORMATS:
            raise ConfigError(f"must be one of {FORMATS}", "output.format")
        if self.preset not in PRESETS:
            raise ConfigError(f"must be one of {PRESETS}", "preset")
        if self.workers < 1:
            raise ConfigError("must be >= 1", "workers")

    def to_dict(self) -> dict:
        s = self.solver
        outer = {"eps_outer": s.eps_outer, "tau_max": s.tau_max, "ris_beamformer": s.ris_beamformer}
        return {
            "preset": self.preset,
            "scenario": scenario_to_dict(self.scenario),
            "solver": {
                "outer": outer,
                "sca": _params_to_dict(s.sca, "sca"),
                "ppo": _params_to_dict(s.ppo, "ppo"),
                "woa": _params_to_dict(s.woa, "woa"),
                "relay": _params_to_dict(s.relay, "relay"),
            },
            "sweep": {"variable": self.sweep.variable, "values": list(self.sweep.values)},
            "baselines": list(self.baselines),
            "seeds": list(self.seeds),
            "output": {"directory": self.output_dir, "format": self.output_format},
            "workers": self.workers,
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical config, excluding output location and worker count."""
        d = self.to_dict()
        d.pop("output")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def preset_scenario(name: str) -> ScenarioConfig:
    if name == "paper":
        return paper_scenario()
    if name == "desk":
        return desk_scenario(direct_loss=db_to_linear(-70.0))
    raise ConfigError(f"must be one of {PRESETS}", "preset")


def config_from_dict(data: dict | None, preset: str | None = None) -> ExperimentConfig:
    """Validate a parsed config mapping; ``preset`` overrides the file's preset."""
    data = {} if data is None else data
    top = ("preset", "scenario", "solver", "sweep", "baselines", "seeds", "output", "workers")
    _check_keys(data, top, "")
    preset = preset or data.get("preset", "paper")
    base = preset_scenario(preset)
    sc = scenario_from_dict(data.get("scenario") or {}, base)
    solver_data = data.get("solver") or {}
    _check_keys(solver_data, ("outer", "sca", "ppo", "woa", "relay"), "solver")
    outer = solver_data.get("outer") or {}
    _check_keys(outer, ("eps_outer", "tau_max", "ris_beamformer"), "solver.outer")
    defaults = altopt.SolverParams()
    solver = altopt.SolverParams(
        sca=_params_from_dict(sca.ScaParams, solver_data.get("sca") or {}, "sca", defaults.sca),
        ppo=_params_from_dict(ppo.PpoHyperparams, solver_data.get("ppo") or {}, "ppo", defaults.ppo),
        woa=_params_from_dict(woa.WoaParams, solver_data.get("woa") or {}, "woa", defaults.woa),
        relay=_params_from_dict(altopt.RelayParams, solver_data.get("relay") or {}, "relay",
                                defaults.relay),
        eps_outer=float(outer.get("eps_outer", defaults.eps_outer)),
        tau_max=int(outer.get("tau_max", defaults.tau_max)),
        ris_beamformer=str(outer.get("ris_beamformer", defaults.ris_beamformer)),
    )
    sw = data.get("sweep") or {}
    _check_keys(sw, ("variable", "values"), "sweep")
    if sw:
        sweep = SweepSpec(sw.get("variable", "p_max_dbm"), list(sw.get("values", [])))
    else:
        sweep = SweepSpec("p_max_dbm", [_to_dbm(sc.p_max)])
    out = data.get("output") or {}
    _check_keys(out, ("directory", "format"), "output")
    seeds = data.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("must be a list of integers", "seeds")
    baselines = data.get("baselines", ["proposed"])
    if not isinstance(baselines, list):
        raise ConfigError("must be a list", "baselines")
    return ExperimentConfig(sc, solver, sweep, list(baselines), list(seeds),
                            str(out.get("directory", "results")), str(out.get("format", "csv")),
                            preset, int(data.get("workers", 1)))


def load_config(path: str, preset: str | None = None) -> ExperimentConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return config_from_dict(data, preset)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


@dataclass
class ResultRecord:
    run_id: str
    baseline: str
    seed: int
    variable: str
    value: float
    status: str                   # "ok" or "failed:<stage>"
    sum_rate_bps: float
    ee_bits_per_joule: float
    total_power_w: float
    slacks: dict
    tau: int
    config_hash: str
    code_version: str
    wall_time_s: float = 0.0      # kept out of the result files
    trace: dict = field(default_factory=dict)
    error: str = ""

    @property
    def trace_ref(self) -> str:
        return f"traces.json#{self.run_id}"

    def row(self) -> dict:
        s = self.slacks
        return {
            "schema_version": SCHEMA_VERSION, "run_id": self.run_id, "baseline": self.baseline,
            "seed": self.seed, "variable": self.variable, "value": self.value, "status": self.status,
            "sum_rate_bps": self.sum_rate_bps, "ee_bits_per_joule": self.ee_bits_per_joule,
            "total_power_w": self.total_power_w,
            "min_rate_slack_bps": s.get("min_rate_slack", math.nan),
            "separation_slack_m2": s.get("min_separation_slack", math.nan),
            "power_slack_w": s.get("power_slack", math.nan),
            "phase_ok": s.get("phase_ok", False), "binary_ok": s.get("binary_ok", False),
            "tau": self.tau, "config_hash": self.config_hash, "code_version": self.code_version,
            "trace_ref": self.trace_ref,
        }


def run_id(value_index: int, baseline: str, seed: int) -> str:
    return f"v{value_index:03d}-{altopt.BASELINES.index(baseline)}{baseline}-s{seed:06d}"


def _run_one(job) -> ResultRecord:
    cfg, vi, value, kind, seed = job
    sc = cfg.sweep.apply(cfg.scenario, value)
    rid = run_id(vi, kind, seed)
    t0 = time.perf_counter()
    try:
        st = altopt.run_baseline(kind, sc, seed, cfg.solver)
    except Exception as exc:  # noqa: BLE001 - sweeps are fail-soft
        stage = getattr(exc, "stage", type(exc).__name__)
        return ResultRecord(rid, kind, seed, cfg.sweep.variable, value, f"failed:{stage}",
                            math.nan, math.nan, math.nan, {}, 0, cfg.config_hash(), __version__,
                            time.perf_counter() - t0, {}, str(exc))
    trace = {
        "outer": [{"tau": r.tau, "ee": r.ee, "sum_rate": r.sum_rate, "power": r.power}
                  for r in st.trace],
        "ppo_cumulative_reward": [list(map(float, c)) for c in st.ppo_curves],
        "aris_positions": st.q.tolist(),
    }
    return ResultRecord(rid, kind, seed, cfg.sweep.variable, value, "ok", float(st.sum_rate),
                        float(st.objective), float(st.power), dict(st.slacks), int(st.tau),
                        cfg.config_hash(), __version__, time.perf_counter() - t0, trace)


def sweep_jobs(cfg: ExperimentConfig) -> list:
    return [(cfg, vi, value, kind, seed)
            for vi, value in enumerate(cfg.sweep.values)
            for kind in cfg.baselines
            for seed in cfg.seeds]


def run_sweep(cfg: ExperimentConfig, partial_path: str | None = None, progress=None) -> list:
    """One run per (value, baseline, seed), returned sorted by run id.

    Failed runs are recorded with ``status="failed:<stage>"`` and the sweep goes on.
    When ``partial_path`` is given, each finished record is appended there as a
    JSON line so an interrupted sweep keeps its results.
    """
    jobs = sweep_jobs(cfg)
    records = []

    def collect(rec):
        records.append(rec)
        if partial_path:
            with open(partial_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(_jsonable(rec.row())) + "\n")
        if progress:
            progress(rec)

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for rec in pool.map(_run_one, jobs):
                collect(rec)
    else:
        for job in jobs:
            collect(_run_one(job))
    return sorted(records, key=lambda r: r.run_id)


# --------------------------------------------------------------------------
# statistics and output
# --------------------------------------------------------------------------


def compute_cdf(records, metric: str = "sum_rate_bps") -> list:
    """Empirical CDF as ``(value, P[X <= value])`` pairs at the distinct sample values."""
    vals = [r[metric] if isinstance(r, dict) else getattr(r, metric, r) for r in records]
    vals = np.asarray([v for v in vals if not (isinstance(v, float) and math.isnan(v))], dtype=float)
    if vals.size == 0:
        raise ValueError("compute_cdf needs at least one sample")
    xs = np.unique(vals)
    probs = np.searchsorted(np.sort(vals), xs, side="right") / vals.size
    return [(float(x), float(p)) for x, p in zip(xs, probs)]


def cdf_at(cdf: list, x: float) -> float:
    """Evaluate a step CDF (right-continuous) at ``x``."""
    p = 0.0
    for v, q in cdf:
        if v <= x:
            p = q
        else:
            break
    return p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize(records) -> dict:
    """Medians and CDF grids per (baseline, swept value) over successful runs."""
    groups: dict = {}
    for r in records:
        if r.status != "ok":
            continue
        groups.setdefault((r.baseline, r.value), []).append(r)
    out = []
    for (kind, value), recs in sorted(groups.items(), key=lambda kv: (altopt.BASELINES.index(kv[0][0]), kv[0][1])):
        entry = {"baseline": kind, "value": value, "n": len(recs)}
        for metric in ("sum_rate_bps", "ee_bits_per_joule", "total_power_w"):
            entry[f"median_{metric}"] = float(np.median([getattr(r, metric) for r in recs]))
        entry["cdf_sum_rate_bps"] = compute_cdf(recs, "sum_rate_bps")
        entry["cdf_ee_bits_per_joule"] = compute_cdf(recs, "ee_bits_per_joule")
        out.append(entry)
    failed = sorted(r.run_id for r in records if r.status != "ok")
    variable = records[0].variable if records else ""
    return {"schema_version": SCHEMA_VERSION, "code_version": __version__, "variable": variable,
            "groups": out, "failed_runs": failed}


def emit_results(records, fmt: str, path: str) -> list:
    """Write result table, summary, traces and timing files into directory ``path``.

    Returns the written paths; an empty record list writes nothing and warns.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    records = sorted(records, key=lambda r: r.run_id)
    if not records:
        warnings.warn("no result records to emit; nothing written", stacklevel=2)
        return []
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    rows = [r.row() for r in records]
    files = {}
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COLUMNS])
        files["results.csv"] = buf.getvalue()
    else:
        files["results.json"] = json.dumps({"schema_version": SCHEMA_VERSION, "columns": list(COLUMNS),
                                            "records": _jsonable(rows)}, indent=1) + "\n"
    files["summary.json"] = json.dumps(_jsonable(summarize(records)), indent=1) + "\n"
    files["traces.json"] = json.dumps(_jsonable({r.run_id: r.trace for r in records}), indent=1) + "\n"
    timing = io.StringIO()
    timing.write("run_id,wall_time_s\n")
    for r in records:
        timing.write(f"{r.run_id},{r.wall_time_s:.3f}\n")
    files["timing.csv"] = timing.getvalue()
    written = []
    for name, text in files.items():
        target = os.path.join(path, name)
        try:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc}") from exc
        written.append(target)
    return written


def read_results_csv(path: str) -> list:
    """Rows of a result table as dicts; refuses files from another schema version."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        if int(row["schema_version"]) != SCHEMA_VERSION:
            raise ValueError(f"{path}: schema version {row['schema_version']} != {SCHEMA_VERSION}")
    return rows


# --------------------------------------------------------------------------
# brute-force oracle checks on tiny instances
# --------------------------------------------------------------------------


def oracle_scenario(**overrides) -> ScenarioConfig:
    """One UE, one ARIS with three 1-bit elements, heavily blocked direct link."""
    base = dict(n_ues=1, n_aris=1, n_elements=3, n_antennas=4, phase_bits=1,
                direct_loss=db_to_linear(-90.0))
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass
class OracleOutcome:
    seed: int
    ppo_ee: float
    optimum_ee: float
    ratio: float
    max_alignment_offset: float   # rad, largest offset of an active cascaded term from the direct term
    aligned: bool                 # within one quantization step


def oracle_check(seed: int, hyper: ppo.PpoHyperparams | None = None,
                 cfg: ScenarioConfig | None = None) -> OracleOutcome:
    """Train PPO on a tiny instance and compare its greedy decode with exhaustive search."""
    from . import model

    cfg = cfg or oracle_scenario()
    rng = np.random.default_rng(seed)
    geom = model.make_geometry(rng, cfg)
    ch, _ = model.sample_channels(rng, cfg, geom)
    g = model.mrt_beamformer(ch.direct, cfg.p_max)
    env = ppo.RisEnv(cfg, geom, ch, g)
    best_ris, best, _ = ppo.brute_force_oracle(env)
    res = ppo.ppo_train(env, hyper or ppo.PpoHyperparams(), seed=seed, record_greedy=False)
    offsets = altopt.dominates_phase_alignment(ch, best_ris, g)
    worst = float(np.nanmax(offsets)) if np.any(best_ris.delta) else 0.0
    step = 2.0 * math.pi / cfg.n_phases
    return OracleOutcome(seed, res.ee, best, res.ee / best, worst, worst <= step + 1e-12)
