"""Built-in experiment configurations."""

from __future__ import annotations

import copy

from .errors import ConfigError

PRESETS: dict[str, dict] = {
    "mp_fp_baseline": {
        "description": "classical FP on matching pennies, 1e5 rounds",
        "game": "matching_pennies",
        "algorithm": "fp",
        "horizon": 100000,
        "stride": 100,
    },
    "mp_weakened_fp": {
        "description": "weakened FP on matching pennies, eps_n = n^-1/2, uniform selection",
        "game": "matching_pennies",
        "algorithm": "fp",
        "horizon": 100000,
        "epsilon": {"kind": "power", "c": 1.0, "b": 0.5},
        "selector": "uniform",
        "stride": 100,
    },
    "coordination_fp": {
        "description": "classical FP on the 2x2 coordination game, 1e4 rounds",
        "game": "coordination2",
        "algorithm": "fp",
        "horizon": 10000,
    },
    "congestion_fp": {
        "description": "classical FP on the 3-player congestion game, 1e4 rounds",
        "game": "congestion_3p",
        "algorithm": "fp",
        "horizon": 10000,
    },
    "jsfp_congestion": {
        "description": "joint-strategy FP on the 3-player congestion game",
        "game": "congestion_3p",
        "algorithm": "jsfp",
        "horizon": 10000,
    },
    "shapley_cycling": {
        "description": "classical FP cycling on Shapley's 3x3 game (no convergence)",
        "game": "shapley3",
        "algorithm": "fp",
        "horizon": 100000,
        "stride": 100,
    },
    "ecfp_cne": {
        "description": "empirical centroid FP on the 3-player congestion game with CNE/MCE gaps",
        "game": "congestion_3p",
        "algorithm": "ecfp_centroid",
        "horizon": 10000,
        "metrics": ["nash_gap", "cne_gap", "mce_gap"],
    },
    "ring_consensus": {
        "description": "distributed FP, 4-agent ring, running consensus",
        "runtime": "distributed",
        "game": "congestion_4p",
        "algorithm": "fp",
        "horizon": 10000,
        "graph": {"edges": "ring", "model": "static"},
        "protocol": "running_consensus",
    },
    "ring_link_drops": {
        "description": "distributed FP, 4-agent ring, iid link drops rho = 0.3",
        "runtime": "distributed",
        "game": "congestion_4p",
        "algorithm": "fp",
        "horizon": 30000,
        "graph": {"edges": "ring", "model": "iid_drop", "rho": 0.3},
        "protocol": "running_consensus",
    },
    "ring_gossip": {
        "description": "distributed ECFP, 3-agent ring, one random gossip edge per round",
        "runtime": "distributed",
        "game": "congestion_3p",
        "algorithm": "ecfp_centroid",
        "horizon": 10000,
        "graph": {"edges": "ring", "model": "gossip"},
        "protocol": "gossip",
    },
    "async_alternating": {
        "description": "asynchronous FP, players active on alternate rounds, coordination game",
        "runtime": "async-discrete",
        "game": "coordination2",
        "horizon": 20000,
        "initial_actions": [1, 2],
        "timing": {"mode": "discrete", "rule": "round_robin"},
    },
    "poisson_async": {
        "description": "continuous-time FP with rate-1 Poisson clocks, matching pennies, T = 1e4",
        "runtime": "async-continuous",
        "game": "matching_pennies",
        "timing": {"mode": "continuous", "rule": "poisson", "params": {"lambda": 1.0}, "T": 10000},
    },
    "adaptive_async": {
        "description": "continuous-time FP with throttled clocks w0 = (1, 0.5), B = 1.5, coordination game",
        "runtime": "async-continuous",
        "game": "coordination2",
        "initial_actions": [1, 2],
        "timing": {"mode": "continuous", "rule": "adaptive", "params": {"w0": [1.0, 0.5], "B": 1.5}, "T": 1000},
    },
    "certify_mp_sweep": {
        "description": "eps-to-delta certification sweep on matching pennies, 200-point grid",
        "runtime": "certify",
        "game": "matching_pennies",
        "algorithm": "fp",
        "certify": {"eps": [0.5, 0.1, 0.02, 0.0], "grid": [20, 10]},
    },
}


def list_presets() -> list[tuple[str, str]]:
    return [(name, doc["description"]) for name, doc in PRESETS.items()]


def preset_config(name: str) -> dict:
    try:
        doc = copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; run `fplab presets` for the list", field="preset") from None
    doc["name"] = name
    return doc
