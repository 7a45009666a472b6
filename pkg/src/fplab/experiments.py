"""Running configured experiments and writing their artifacts."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import asynchronous as asy
from .algorithms import make_algorithm
from .config import ExperimentConfig, validate_document
from .diagnostics import CERTIFY_COLUMNS, certificate_rows, certify_sweep, profile_grid, random_states
from .distributed import CommGraph, distributed_run, error_series
from .engine import METRICS, run
from .errors import ConfigError, RunAborted
from .game import Game, load_game, nash_gap
from .io import write_csv, write_json
from .schedules import PerturbationSchedule, StepSizeSchedule

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"


@dataclass
class Outcome:
    """Everything a run produced, before anything is written to disk."""

    config: ExperimentConfig
    game: Game
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)


def _schedule_rng(seed: int) -> np.random.Generator:
    # timing randomness is drawn from its own stream so selector draws do not shift it
    return np.random.default_rng([seed, 1])


def build_discrete_schedule(cfg: ExperimentConfig, n_players: int) -> asy.DiscreteSchedule:
    t = cfg.timing
    horizon = int(t.get("horizon", cfg.horizon))
    params = t.get("params", {})
    rule = t["rule"]
    if rule == "always":
        return asy.always_active(n_players, horizon)
    if rule == "round_robin":
        return asy.round_robin(n_players, horizon)
    if rule == "mask":
        if "pattern" not in params:
            raise ConfigError("mask rule needs params.pattern", field="timing.params.pattern")
        return asy.periodic_mask(params["pattern"], horizon)
    if rule == "bernoulli":
        p = params.get("p")
        if p is None or len(p) != n_players:
            raise ConfigError(f"bernoulli rule needs {n_players} activity probabilities", field="timing.params.p")
        return asy.bernoulli_activity(p, horizon, _schedule_rng(cfg.seed))
    raise ConfigError(f"rule {rule!r} is not a discrete rule", field="timing.rule")


def build_continuous_schedule(cfg: ExperimentConfig, n_players: int) -> asy.ContinuousSchedule:
    t = cfg.timing
    if "T" not in t:
        raise ConfigError("continuous timing needs T", field="timing.T")
    T = float(t["T"])
    params = t.get("params", {})
    rule = t["rule"]
    if rule == "poisson":
        lam = params.get("lambda", 1.0)
        if isinstance(lam, list) and len(lam) != n_players:
            raise ConfigError(f"need {n_players} Poisson rates", field="timing.params.lambda")
        return asy.poisson_schedule(lam, T, _schedule_rng(cfg.seed), num_agents=n_players)
    if rule in ("adaptive", "deterministic"):
        w0 = params.get("w0")
        if w0 is None or len(w0) != n_players:
            raise ConfigError(f"{rule} rule needs {n_players} base waiting times", field="timing.params.w0")
        if rule == "deterministic":
            return asy.deterministic_schedule(w0, T)
        if "B" not in params:
            raise ConfigError("adaptive rule needs params.B", field="timing.params.B")
        return asy.adaptive_schedule(w0, params["B"], T)
    raise ConfigError(f"rule {rule!r} is not a continuous rule", field="timing.rule")


def _final_metrics(trace) -> dict:
    return {m: (None if math.isnan(trace.final_metric(m)) else trace.final_metric(m)) for m in METRICS if m in trace.metrics}


def _synchrony_doc(rep) -> dict:
    return {
        "min_ratio": rep.min_ratio,
        "max_ratio": rep.max_ratio,
        "max_abs_diff": rep.max_abs_diff,
        "flags": list(rep.flags),
        "passed": rep.passed,
    }


def _empirical_doc(q) -> list:
    return [[float(v) for v in x] for x in q]


def execute(cfg: ExperimentConfig) -> Outcome:
    """Run ``cfg`` in memory."""
    try:
        game = load_game(cfg.game)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc), field="game") from None
    initial = cfg.zero_based_initial()
    base = {
        "name": cfg.name,
        "runtime": cfg.runtime,
        "game": cfg.game_label(),
        "algorithm": cfg.algorithm if cfg.runtime in ("central", "distributed", "certify") else None,
        "fingerprint": cfg.fingerprint,
        "seed": cfg.seed,
        "horizon": cfg.horizon if cfg.runtime in ("central", "distributed", "async-discrete") else None,
    }

    if cfg.runtime == "certify":
        algo = make_algorithm(cfg.algorithm, game)
        cert_doc = cfg.certify
        if "grid" in cert_doc:
            if len(cert_doc["grid"]) != game.num_players:
                raise ConfigError(f"grid needs one size per player ({game.num_players})", field="certify.grid")
            samples = profile_grid(game.action_counts, cert_doc["grid"])
        else:
            samples = random_states(algo, int(cert_doc.get("samples", 200)), seed=cfg.seed)
        kwargs = {"seed": cfg.seed}
        if "radii" in cert_doc:
            kwargs["radii"] = tuple(cert_doc["radii"])
        if "directions" in cert_doc:
            kwargs["num_directions"] = int(cert_doc["directions"])
        certs = certify_sweep(game, algo, cert_doc.get("eps", [0.5, 0.1, 0.02, 0.0]), samples, **kwargs)
        rows = list(certificate_rows(certs))
        summary = {
            **base,
            "final_nash_gap": None,
            "final_metrics": {},
            "certificates": [
                {
                    "eps": c.eps,
                    "delta_min": None if math.isinf(c.delta_min) else c.delta_min,
                    "worst_sample_index": c.worst_sample_index,
                    "samples_flagged_infinite": len(c.flagged),
                }
                for c in certs
            ],
        }
        return Outcome(cfg, game, list(CERTIFY_COLUMNS), rows, summary)

    if cfg.runtime == "async-continuous":
        sched = build_continuous_schedule(cfg, game.num_players)
        et = asy.ct_embed_run(game, sched, selector=cfg.selector, seed=cfg.seed, stride=cfg.stride, initial_actions=initial)
        rep = asy.synchrony_report(et.counts())
        gap = et.final_nash_gap()
        summary = {
            **base,
            "final_nash_gap": gap,
            "final_metrics": {"nash_gap": gap},
            "final_empirical": _empirical_doc(et.empirical()),
            "synchrony": _synchrony_doc(rep),
        }
        return Outcome(cfg, game, et.columns(), list(et.rows()), summary)

    if cfg.runtime == "async-discrete":
        sched = build_discrete_schedule(cfg, game.num_players)
        trace = asy.async_fp_run(
            game, sched, cfg.horizon, cfg.selector, cfg.seed, cfg.metrics, cfg.stride, initial_actions=initial
        )
        asy.embedded_view(trace)
        rep = asy.synchrony_report(trace.info["counts"])
        extra = {"synchrony": _synchrony_doc(rep)}
    else:
        algo = make_algorithm(cfg.algorithm, game, StepSizeSchedule.from_config(cfg.gamma))
        perturb = PerturbationSchedule.from_config(cfg.epsilon)
        common = dict(
            perturb=perturb,
            selector=cfg.selector,
            seed=cfg.seed,
            metrics=cfg.metrics,
            stride=cfg.stride,
            initial_actions=initial,
        )
        if cfg.runtime == "central":
            trace = run(algo, game, cfg.horizon, **common)
            extra = {}
        else:
            graph = CommGraph.from_config(cfg.graph, nodes=game.num_players)
            trace = distributed_run(algo, game, graph, cfg.horizon, protocol=cfg.protocol, init=cfg.init, **common)
            extra = {
                "distributed": {
                    "final_max_est_error": float(error_series(trace)[-1]),
                    "connectivity_violations": len(trace.info["connectivity_violations"]),
                }
            }
    trace.fingerprint = cfg.fingerprint
    gap = nash_gap(game, trace.empirical).nash_gap
    summary = {
        **base,
        "final_nash_gap": gap,
        "final_metrics": _final_metrics(trace),
        "final_empirical": _empirical_doc(trace.empirical),
        **extra,
    }
    return Outcome(cfg, game, trace.columns(), list(trace.rows()), summary)


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Run ``cfg`` and write ``trace.csv`` and ``summary.json`` into ``out_dir``."""
    start = time.perf_counter()
    outcome = execute(cfg)
    elapsed = time.perf_counter() - start
    out = Path(out_dir)
    write_csv(out / TRACE_FILE, outcome.columns, outcome.rows)
    summary = {**outcome.summary, "wall_clock_seconds": elapsed, "trace_file": TRACE_FILE, "trace_rows": len(outcome.rows)}
    try:
        validate_document(summary, "summary")
    except ConfigError as exc:
        raise RunAborted(f"summary failed its schema: {exc}") from None
    write_json(out / SUMMARY_FILE, summary)
    return summary
