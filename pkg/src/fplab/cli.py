"""Command-line entry point: ``fplab {run,presets,certify,validate}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, validate_document
from .errors import ConfigError, DimensionError, FPLabError, OracleOutOfRange
from .presets import list_presets, preset_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
OUT_ENV = "FP_LAB_OUT"


def _load_config(args) -> ExperimentConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset", field="config")
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.from_dict(preset_config(args.preset))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    if args.out_dir:
        return Path(args.out_dir)
    return Path("runs") / cfg.name


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    summary = run_experiment(cfg, out)
    gap = summary["final_nash_gap"]
    gap_txt = "n/a" if gap is None else f"{gap:.6g}"
    _say(args, f"{cfg.name}: final_nash_gap={gap_txt} wall={summary['wall_clock_seconds']:.2f}s -> {out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name, desc in list_presets():
        print(f"{name:20s} {desc}")
    return EXIT_OK


def cmd_certify(args) -> int:
    from .experiments import run_experiment

    if args.config or args.preset:
        cfg = _load_config(args)
        if cfg.runtime != "certify":
            raise ConfigError(f"config {cfg.name!r} is not a certification config", field="runtime")
    else:
        doc = {
            "name": "certify",
            "runtime": "certify",
            "game": args.game,
            "algorithm": args.algorithm,
            "certify": {"eps": args.eps},
        }
        if args.grid:
            doc["certify"]["grid"] = args.grid
        else:
            doc["certify"]["samples"] = args.samples
        cfg = ExperimentConfig.from_dict(doc)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    out = _out_dir(args, cfg)
    summary = run_experiment(cfg, out)
    for c in summary["certificates"]:
        d = "inf" if c["delta_min"] is None else f"{c['delta_min']:.6g}"
        _say(args, f"eps={c['eps']:g} delta_min={d} flagged={c['samples_flagged_infinite']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.config and not args.summary:
        raise ConfigError("give --config and/or --summary", field="config")
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        _say(args, f"config ok: {cfg.name} ({cfg.fingerprint[:12]})")
    if args.summary:
        try:
            doc = json.loads(Path(args.summary).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read summary: {exc}", field="summary") from None
        validate_document(doc, "summary")
        _say(args, "summary ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fplab", description="Fictitious-play learning simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("--config", help="experiment config JSON file")
            p.add_argument("--preset", help="built-in experiment name (see `fplab presets`)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out-dir", help=f"output directory (env {OUT_ENV} takes precedence)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("run", help="run an experiment")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("presets", help="list built-in experiments")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("certify", help="eps-to-delta certification sweep")
    common(p)
    p.add_argument("--game", default="matching_pennies")
    p.add_argument("--algorithm", default="fp")
    p.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.1, 0.02, 0.0])
    p.add_argument("--grid", type=int, nargs="+", help="grid points per player (two-action games)")
    p.add_argument("--samples", type=int, default=200, help="random sample count when no grid is given")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("validate", help="validate a config and/or a summary file")
    p.add_argument("--config")
    p.add_argument("--summary")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionError, OracleOutOfRange) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FPLabError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
