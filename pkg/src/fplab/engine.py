"""Running weakened FP-type processes.

At iteration ``n`` every player picks a pure action from its
``eps_n``-best-response set against its forecast ``f_i(z(n))`` and the
observation state moves by ``z(n+1) = z(n) + gamma(n) (g(sigma(n+1)) - z(n))``.
Exact FP-type play is the ``eps_n == 0`` case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algorithms import FPTypeAlgorithm
from .equilibria import _require_symmetric, cne_gap_unchecked, mce_gap_unchecked
from .errors import ConfigError, RunAborted, StateCorruptionError
from .game import TIE_TOL, Game, action_values, nash_gap
from .schedules import PerturbationSchedule

SELECTORS = ("first_index", "uniform", "sticky")
METRICS = ("nash_gap", "cne_gap", "mce_gap")


def select_action(candidates: Sequence[int], policy: str, previous: Optional[int], rng: np.random.Generator) -> int:
    """Pick one action out of a nonempty, sorted candidate set.

    ``first_index`` takes the smallest index, ``uniform`` draws uniformly with
    ``rng`` and ``sticky`` keeps ``previous`` when it still qualifies.
    """
    if len(candidates) == 0:
        raise ConfigError("selector received an empty candidate set", field="selector")
    if policy == "sticky":
        if previous is not None and previous in candidates:
            return int(previous)
        return int(candidates[0])
    if policy == "first_index":
        return int(candidates[0])
    if policy == "uniform":
        if len(candidates) == 1:
            return int(candidates[0])
        return int(candidates[rng.integers(len(candidates))])
    raise ConfigError(f"unknown selector {policy!r}; expected one of {SELECTORS}", field="selector")


def respond(game: Game, i: int, forecast, eps: float, policy: str, previous, rng) -> tuple[int, float]:
    """Player ``i``'s eps-best response to ``forecast`` and its realized suboptimality."""
    v = action_values(game, i, forecast).tolist()
    best = max(v)
    threshold = best - eps - TIE_TOL
    if policy == "sticky" and previous is not None and v[previous] >= threshold:
        a = previous
    else:
        candidates = [k for k, x in enumerate(v) if x >= threshold]
        a = select_action(candidates, policy, previous, rng)
    return a, best - v[a]


def observation_update(z: np.ndarray, sigma_next, gamma_n: float, algo: FPTypeAlgorithm) -> np.ndarray:
    """``z + gamma_n * (g(sigma_next) - z)``.

    ``sigma_next`` is either a sequence of pure actions or a joint mixed
    strategy (product tuple of arrays or correlated array).
    """
    if not 0.0 < gamma_n <= 1.0:
        raise ValueError(f"step size must lie in (0, 1], got {gamma_n}")
    if algo.validate:
        algo.space.check(z, what="observation state")
    if _is_pure(sigma_next):
        target = algo.g_pure(sigma_next)
    else:
        target = algo.g(sigma_next)
    return z + gamma_n * (target - z)


def _is_pure(sigma) -> bool:
    if isinstance(sigma, np.ndarray):
        return False
    return all(isinstance(a, (int, np.integer)) for a in sigma)


@dataclass(frozen=True)
class Step:
    actions: tuple[int, ...]
    state: np.ndarray
    realized_subopt: np.ndarray


def weakened_step(
    z: np.ndarray,
    n: int,
    algo: FPTypeAlgorithm,
    game: Game,
    perturb: PerturbationSchedule,
    selector: str,
    rng: np.random.Generator,
    previous: Optional[Sequence[int]] = None,
) -> Step:
    """One step of a weakened FP-type process from ``z(n)``."""
    if algo.validate:
        algo.space.check(z, what="observation state")
    eps = perturb(n)
    actions = []
    subopt = np.empty(game.num_players)
    for i in range(game.num_players):
        prev = None if previous is None else previous[i]
        a, s = respond(game, i, algo.f(i, z), eps, selector, prev, rng)
        actions.append(a)
        subopt[i] = s
    z_next = observation_update(z, tuple(actions), algo.schedule(n), algo)
    return Step(tuple(actions), z_next, subopt)


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------


@dataclass
class RunTrace:
    """Per-iteration record of a run; row ``k`` holds iteration ``n = k + 1``.

    ``gammas[k]`` is ``gamma(k+1)``, the step taking ``states[k]`` to
    ``states[k+1]``. ``eps[k]`` and ``realized_subopt[k]`` describe how the
    actions in row ``k`` were chosen (``nan`` in the first row, whose
    actions are the arbitrary initial profile). Metric arrays hold ``nan``
    on rows that were not sampled.
    """

    game: Game
    algorithm: str
    space_labels: tuple[str, ...]
    actions: np.ndarray
    states: np.ndarray
    gammas: np.ndarray
    eps: np.ndarray
    realized_subopt: np.ndarray
    metrics: dict = field(default_factory=dict)
    empirical: tuple = ()
    seed: Optional[int] = None
    fingerprint: str = ""
    extra_columns: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def recursion_residual(self, algo: FPTypeAlgorithm) -> float:
        """Largest violation of the stored observation recursion."""
        worst = 0.0
        for k in range(self.horizon - 1):
            expect = self.states[k] + self.gammas[k] * (algo.g_pure(tuple(self.actions[k + 1])) - self.states[k])
            worst = max(worst, float(np.max(np.abs(expect - self.states[k + 1]))))
        return worst

    def empirical_at(self, n: int) -> tuple[np.ndarray, ...]:
        """Per-player empirical action frequencies over rounds ``1..n``."""
        counts = self.game.action_counts
        return tuple(np.bincount(self.actions[:n, i], minlength=k) / n for i, k in enumerate(counts))

    def metric(self, name: str) -> np.ndarray:
        return self.metrics.get(name, np.full(self.horizon, np.nan))

    def final_metric(self, name: str) -> float:
        m = self.metrics.get(name)
        if m is None:
            return math.nan
        return float(m[-1])

    def columns(self) -> list[str]:
        n = self.game.num_players
        cols = ["n"] + [f"action_{i + 1}" for i in range(n)] + list(self.space_labels)
        cols += ["eps_n", "realized_subopt_max"] + list(METRICS) + list(self.extra_columns)
        return cols

    def rows(self):
        from .io import fmt

        metric_cols = [self.metrics.get(m) for m in METRICS]
        extras = list(self.extra_columns.values())
        sub_max = np.max(self.realized_subopt, axis=1)
        for k in range(self.horizon):
            row = [str(k + 1)]
            row += [str(int(a) + 1) for a in self.actions[k]]
            row += [fmt(v) for v in self.states[k]]
            row.append(fmt(self.eps[k]))
            row.append(fmt(sub_max[k]))
            row += ["" if col is None else fmt(col[k]) for col in metric_cols]
            row += [fmt(col[k]) for col in extras]
            yield row


def metric_rows(horizon: int, stride: int) -> np.ndarray:
    """Boolean mask of the iterations at which metrics are sampled."""
    n = np.arange(1, horizon + 1)
    mask = (n % stride == 0) | (n == 1) | (n == horizon)
    return mask


class MetricRecorder:
    """Samples equilibrium metrics on the empirical action frequencies."""

    def __init__(self, game: Game, names: Sequence[str], horizon: int, stride: int):
        unknown = set(names) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}; expected a subset of {METRICS}", field="metrics")
        if stride < 1:
            raise ConfigError("stride must be at least 1", field="stride")
        if {"cne_gap", "mce_gap"} & set(names):
            _require_symmetric(game)
        self.game = game
        self.names = tuple(names)
        self.mask = metric_rows(horizon, stride)
        self.values = {m: np.full(horizon, np.nan) for m in self.names}

    def record(self, k: int, q: Sequence[np.ndarray]) -> None:
        if not self.mask[k]:
            return
        for name in self.names:
            if name == "nash_gap":
                self.values[name][k] = nash_gap(self.game, tuple(q)).nash_gap
            elif name == "cne_gap":
                self.values[name][k] = cne_gap_unchecked(self.game, np.mean(np.stack(q), axis=0))
            else:
                self.values[name][k] = mce_gap_unchecked(self.game, tuple(q))


def check_finite(z: np.ndarray, n: int) -> None:
    if not math.isfinite(float(z.sum())):
        bad = int(np.flatnonzero(~np.isfinite(z))[0])
        raise RunAborted(f"non-finite observation state at iteration {n}, component {bad}", iteration=n, component=bad)


def initial_profile(game: Game, initial_actions) -> tuple[int, ...]:
    if initial_actions is None:
        return (0,) * game.num_players
    acts = tuple(int(a) for a in initial_actions)
    if len(acts) != game.num_players or any(not 0 <= a < k for a, k in zip(acts, game.action_counts)):
        raise ConfigError(f"initial actions {acts} do not fit action counts {game.action_counts}", field="initial_actions")
    return acts


def run(
    algo: FPTypeAlgorithm,
    game: Game,
    horizon: int,
    perturb: PerturbationSchedule | None = None,
    selector: str = "sticky",
    seed: int = 0,
    metrics: Sequence[str] = ("nash_gap",),
    stride: int = 10,
    initial_actions: Optional[Sequence[int]] = None,
) -> RunTrace:
    """Simulate ``horizon`` iterations of a weakened FP-type process.

    The initial profile (default: every player's first action) is pushed
    through ``g`` to give ``z(1)``. Deterministic for a fixed ``seed``.
    """
    if horizon < 1:
        raise ConfigError("horizon must be at least 1", field="horizon")
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; expected one of {SELECTORS}", field="selector")
    algo.check_game(game)
    perturb = perturb or PerturbationSchedule()
    rng = np.random.default_rng(seed)
    n_players = game.num_players
    counts = game.action_counts

    actions = np.zeros((horizon, n_players), dtype=np.int64)
    states = np.zeros((horizon, algo.space.dim))
    gammas = algo.schedule.values(horizon - 1) if horizon > 1 else np.zeros(0)
    eps = np.full(horizon, np.nan)
    subopt = np.full((horizon, n_players), np.nan)
    recorder = MetricRecorder(game, metrics, horizon, stride)

    prev = initial_profile(game, initial_actions)
    z = algo.g_pure(prev)
    if algo.validate:
        algo.space.check(z, what="initial state")
    actions[0] = prev
    states[0] = z
    tallies = [np.zeros(k) for k in counts]
    for i, a in enumerate(prev):
        tallies[i][a] += 1.0
    recorder.record(0, [t for t in tallies])

    for k in range(1, horizon):
        n = k  # the state in row k-1 is z(n)
        eps_n = perturb(n)
        cur = []
        for i in range(n_players):
            a, s = respond(game, i, algo.f(i, z), eps_n, selector, prev[i], rng)
            cur.append(a)
            subopt[k, i] = s
            tallies[i][a] += 1.0
        prev = tuple(cur)
        z = z + gammas[k - 1] * (algo.g_pure(prev) - z)
        check_finite(z, n + 1)
        if algo.validate:
            try:
                algo.space.check(z)
            except StateCorruptionError as exc:
                raise RunAborted(f"iteration {n + 1}: {exc}", iteration=n + 1) from exc
        actions[k] = prev
        states[k] = z
        eps[k] = eps_n
        if recorder.mask[k]:
            recorder.record(k, [t / (k + 1) for t in tallies])

    return RunTrace(
        game=game,
        algorithm=algo.name,
        space_labels=algo.space.labels or tuple(f"z_{j + 1}" for j in range(algo.space.dim)),
        actions=actions,
        states=states,
        gammas=gammas,
        eps=eps,
        realized_subopt=subopt,
        metrics=recorder.values,
        empirical=tuple(t / horizon for t in tallies),
        seed=seed,
    )
