"""Command-line entry point: ``arisee {run,sweep,baselines,validate,oracle}``."""
from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import __version__, altopt, harness

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUN = 4
EXIT_IO = 5
EXIT_ORACLE = 6


def _load(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.load_config(args.config, args.preset)
    else:
        cfg = harness.config_from_dict({}, args.preset or "desk")
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "format", None):
        cfg.output_format = args.format
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    return cfg


def _progress(rec: harness.ResultRecord) -> None:
    if rec.status == "ok":
        print(f"{rec.run_id}: sum-rate {rec.sum_rate_bps / 1e6:.3f} Mbps, EE {rec.ee_bits_per_joule:.1f} bit/J",
              flush=True)
    else:
        print(f"{rec.run_id}: {rec.status} ({rec.error})", flush=True)


def _execute(cfg: harness.ExperimentConfig) -> int:
    if not cfg.baselines:
        warnings.warn("empty baseline list; nothing to run")
        return EXIT_OK
    os.makedirs(cfg.output_dir, exist_ok=True)
    partial = os.path.join(cfg.output_dir, "partial.jsonl")
    if os.path.exists(partial):
        os.remove(partial)
    records = harness.run_sweep(cfg, partial_path=partial, progress=_progress)
    paths = harness.emit_results(records, cfg.output_format, cfg.output_dir)
    os.remove(partial)
    for p in paths:
        print(f"wrote {p}")
    failed = [r for r in records if r.status != "ok"]
    if failed:
        print(f"{len(failed)} of {len(records)} runs failed", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    cfg.baselines = [args.baseline]
    cfg.sweep = harness.SweepSpec(cfg.sweep.variable, cfg.sweep.values[:1])
    return _execute(cfg)


def cmd_sweep(args) -> int:
    return _execute(_load(args))


def cmd_baselines(args) -> int:
    cfg = _load(args)
    cfg.baselines = list(altopt.BASELINES)
    return _execute(cfg)


def cmd_validate(args) -> int:
    cfg = _load(args)
    runs = len(harness.sweep_jobs(cfg))
    print(f"config ok: hash {cfg.config_hash()}, preset {cfg.preset}, {runs} runs")
    return EXIT_OK


def cmd_oracle(args) -> int:
    seeds = [args.seed] if args.seed is not None else list(range(args.count))
    passed = 0
    for seed in seeds:
        out = harness.oracle_check(seed)
        ok = out.ratio >= args.threshold and out.aligned
        passed += ok
        print(f"seed {seed}: PPO/optimum {out.ratio:.4f}, max alignment offset "
              f"{out.max_alignment_offset:.3f} rad -> {'pass' if ok else 'fail'}")
    need = max(1, int(round(args.min_fraction * len(seeds))))
    print(f"{passed}/{len(seeds)} passed (need {need})")
    return EXIT_OK if passed >= need else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arisee", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--preset", choices=harness.PRESETS, default=None,
                       help="base scenario (default: the file's preset, or desk without a file)")
        p.add_argument("--seed", type=int, default=None, help="run a single seed")
        if outputs:
            p.add_argument("--out", help="output directory")
            p.add_argument("--format", choices=harness.FORMATS, default=None)
            p.add_argument("--workers", type=int, default=None, help="worker processes")

    p = sub.add_parser("run", help="single scenario, one scheme")
    common(p)
    p.add_argument("--baseline", choices=altopt.BASELINES, default="proposed")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="sweep one variable over the configured values")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("baselines", help="all five schemes on the configured sweep")
    common(p)
    p.set_defaults(func=cmd_baselines)
    p = sub.add_parser("validate", help="check a config file without running it")
    common(p, outputs=False)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("oracle", help="PPO against exhaustive search on tiny instances")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--count", type=int, default=10, help="seeds 0..count-1 when --seed is absent")
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--min-fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
