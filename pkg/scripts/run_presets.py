"""Run built-in presets and print one summary line each."""

import argparse
from pathlib import Path

from fplab.config import ExperimentConfig
from fplab.experiments import run_experiment
from fplab.presets import PRESETS, preset_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", help="presets to run (default: all)")
    ap.add_argument("--out-dir", default="runs")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    for name in args.names or sorted(PRESETS):
        cfg = ExperimentConfig.from_dict(preset_config(name))
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        s = run_experiment(cfg, Path(args.out_dir) / name)
        gap = s["final_nash_gap"]
        gap = "n/a" if gap is None else f"{gap:.4g}"
        print(f"{name:20s} gap={gap:>10s} rows={s['trace_rows']:>7d} {s['wall_clock_seconds']:.2f}s")


if __name__ == "__main__":
    main()
