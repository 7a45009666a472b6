"""Asynchronous fictitious play.

Discrete mode: in each round an agent is active or idle. Active agents best
respond to the opponents' current empirical frequencies; idle agents repeat
their last action and their empirical frequency is frozen. Frequencies are
averages over the agent's own active rounds.

Continuous mode: each agent acts at its own clock instants, best responding
to the opponents' frequencies just before the instant. Agents acting at the
same instant do not see each other's same-instant actions.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import SELECTORS, MetricRecorder, RunTrace, initial_profile, respond
from .errors import ConfigError, StateCorruptionError
from .game import TIE_TOL, Game, action_values, nash_gap

SQRT2 = math.sqrt(2.0)
BOUND_SLACK = 1e-12


# --------------------------------------------------------------------------
# discrete activity schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteSchedule:
    """Activity indicators ``active[n-1, i] == X_i(n)``; every agent is active in round 1."""

    active: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.active, dtype=bool)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ConfigError("activity mask must be a nonempty rounds-by-agents array", field="timing.params")
        a = a.copy()
        a[0] = True
        a.setflags(write=False)
        object.__setattr__(self, "active", a)

    @property
    def horizon(self) -> int:
        return self.active.shape[0]

    @property
    def num_agents(self) -> int:
        return self.active.shape[1]

    def counts(self) -> np.ndarray:
        """``N_i(n)`` for every round."""
        return np.cumsum(self.active, axis=0)

    def activations(self, i: int) -> np.ndarray:
        """Rounds (1-based) in which agent ``i`` is active: ``tau_i(1), tau_i(2), ...``."""
        return np.flatnonzero(self.active[:, i]) + 1


def always_active(num_agents: int, horizon: int) -> DiscreteSchedule:
    return DiscreteSchedule(np.ones((horizon, num_agents), dtype=bool))


def periodic_mask(pattern, horizon: int) -> DiscreteSchedule:
    """Repeat a rounds-by-agents 0/1 ``pattern`` up to ``horizon`` rounds."""
    p = np.asarray(pattern, dtype=bool)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ConfigError("mask pattern must be a nonempty rounds-by-agents array", field="timing.params.pattern")
    reps = -(-horizon // p.shape[0])
    return DiscreteSchedule(np.tile(p, (reps, 1))[:horizon])


def round_robin(num_agents: int, horizon: int) -> DiscreteSchedule:
    """Agent ``(n-2) mod N`` is the only active agent in round ``n >= 2``."""
    return periodic_mask(np.eye(num_agents, dtype=bool)[np.r_[num_agents - 1, 0 : num_agents - 1]], horizon)


def bernoulli_activity(probs: Sequence[float], horizon: int, rng: np.random.Generator) -> DiscreteSchedule:
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ConfigError("activity probabilities must lie in [0, 1]", field="timing.params.p")
    return DiscreteSchedule(rng.random((horizon, p.size)) < p)


# --------------------------------------------------------------------------
# discrete asynchronous play
# --------------------------------------------------------------------------


def async_fp_run(
    game: Game,
    schedule: DiscreteSchedule,
    horizon: Optional[int] = None,
    selector: str = "sticky",
    seed: int = 0,
    metrics: Sequence[str] = ("nash_gap",),
    stride: int = 10,
    initial_actions=None,
) -> RunTrace:
    """Fictitious play with activity indicators.

    The trace's state columns are the per-player empirical frequencies
    ``q(n)``; extra columns ``active_i`` and ``N_i`` record the schedule.
    """
    horizon = schedule.horizon if horizon is None else horizon
    if horizon < 1:
        raise ConfigError("horizon must be at least 1", field="horizon")
    if schedule.horizon < horizon:
        raise ConfigError(f"schedule covers {schedule.horizon} rounds, horizon is {horizon}", field="timing.horizon")
    if schedule.num_agents != game.num_players:
        raise ConfigError(f"schedule has {schedule.num_agents} agents, game has {game.num_players}", field="timing")
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; expected one of {SELECTORS}", field="selector")
    rng = np.random.default_rng(seed)
    n_players = game.num_players
    counts = game.action_counts
    offsets = np.cumsum((0,) + counts[:-1])
    dim = sum(counts)
    mask = schedule.active[:horizon]

    actions = np.zeros((horizon, n_players), dtype=np.int64)
    states = np.zeros((horizon, dim))
    subopt = np.full((horizon, n_players), np.nan)
    recorder = MetricRecorder(game, metrics, horizon, stride)

    prev = initial_profile(game, initial_actions)
    sums = [np.zeros(k) for k in counts]
    num = np.ones(n_players)
    for i, a in enumerate(prev):
        sums[i][a] = 1.0
    q = [s.copy() for s in sums]
    actions[0] = prev
    states[0] = np.concatenate(q)
    recorder.record(0, q)

    for k in range(1, horizon):
        cur = list(prev)
        for i in range(n_players):
            if not mask[k, i]:
                continue
            others = tuple(q[j] for j in range(n_players) if j != i)
            a, s = respond(game, i, others, 0.0, selector, prev[i], rng)
            cur[i] = a
            subopt[k, i] = s
        for i in range(n_players):
            if mask[k, i]:
                sums[i][cur[i]] += 1.0
                num[i] += 1.0
                q[i] = sums[i] / num[i]
        prev = tuple(cur)
        actions[k] = prev
        states[k] = np.concatenate(q)
        if recorder.mask[k]:
            recorder.record(k, q)

    n_counts = np.cumsum(mask, axis=0)
    extra = {}
    for i in range(n_players):
        extra[f"active_{i + 1}"] = mask[:, i].astype(float)
    for i in range(n_players):
        extra[f"N_{i + 1}"] = n_counts[:, i].astype(float)
    labels = tuple(f"q_p{i + 1}_a{a + 1}" for i, c in enumerate(counts) for a in range(c))
    trace = RunTrace(
        game=game,
        algorithm="async_fp",
        space_labels=labels,
        actions=actions,
        states=states,
        gammas=np.full(max(horizon - 1, 0), np.nan),
        eps=np.where(np.arange(horizon) == 0, np.nan, 0.0),
        realized_subopt=subopt,
        metrics=recorder.values,
        empirical=tuple(states[-1, o : o + c].copy() for o, c in zip(offsets, counts)),
        seed=seed,
        extra_columns=extra,
    )
    trace.info["counts"] = n_counts
    trace.info["active"] = mask
    return trace


@dataclass
class EmbeddedView:
    """The synchronous process seen at each agent's own activation rounds.

    ``tau[i][s-1]`` is the round of agent ``i``'s ``s``-th activation,
    ``q_tilde[i][s-1]`` its frequency after ``s`` activations, and
    ``q_hat[i][s-1]`` the profile of frequencies agent ``i`` responded to at
    its ``(s+1)``-th activation (taken in round ``tau_i(s+1) - 1``).
    ``staleness_worst`` and ``drift_worst`` are the largest excesses of the
    measured distance over its bound; nonpositive means the bound held.
    """

    tau: list
    sigma_tilde: list
    q_tilde: list
    q_hat: list
    staleness_worst: float = -math.inf
    drift_worst: float = -math.inf


def _player_blocks(game: Game) -> list[slice]:
    offsets = np.cumsum((0,) + game.action_counts)
    return [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]


def embedded_view(trace: RunTrace, schedule: Optional[DiscreteSchedule] = None) -> EmbeddedView:
    """Extract the embedded process and assert its defining identities.

    Checks, for every agent and activation: the count identity
    ``N_i(tau_i(s)) == s``; the best-response identity for the embedded
    actions against the stale frequencies; the staleness bound
    ``|q_j(tau_i(s)) - q~_j(s)|_2 <= sqrt(2) |N_j - N_i| / min(N_i, N_j)``;
    and the one-step drift ``|q~_j(s+1) - q~_j(s)|_2 <= sqrt(2) / s``.
    Any failure raises :class:`StateCorruptionError`.
    """
    game = trace.game
    mask = trace.info["active"] if schedule is None else schedule.active[: trace.horizon]
    counts = np.cumsum(mask, axis=0)
    blocks = _player_blocks(game)
    n_players = game.num_players
    q_rows = [trace.states[:, b] for b in blocks]

    tau, sig, qt = [], [], []
    for i in range(n_players):
        rounds = np.flatnonzero(mask[:, i])  # 0-based rows
        s = np.arange(1, len(rounds) + 1)
        if np.any(counts[rounds, i] != s):
            raise StateCorruptionError(f"activation count identity fails for agent {i + 1}")
        tau.append(rounds + 1)
        sig.append(trace.actions[rounds, i])
        qt.append(q_rows[i][rounds])

    q_hat = []
    for i in range(n_players):
        rows = tau[i][1:] - 2  # row of round tau_i(s+1) - 1
        stale = trace.states[rows]
        q_hat.append(stale)
        for s_idx, (row, a) in enumerate(zip(rows, sig[i][1:])):
            others = tuple(stale[s_idx, blocks[j]] for j in range(n_players) if j != i)
            v = action_values(game, i, others)
            if v[a] < v.max() - TIE_TOL:
                raise StateCorruptionError(
                    f"agent {i + 1}'s embedded action {s_idx + 2} is not a best response to its stale view"
                )

    stale_worst = -math.inf
    for i in range(n_players):
        for j in range(n_players):
            if i == j:
                continue
            rows = tau[i] - 1
            s = np.arange(1, len(rows) + 1)
            n_j = counts[rows, j]
            ok = s <= len(qt[j])
            lhs = np.linalg.norm(q_rows[j][rows[ok]] - qt[j][s[ok] - 1], axis=1)
            rhs = SQRT2 * np.abs(n_j[ok] - s[ok]) / np.minimum(n_j[ok], s[ok])
            if lhs.size:
                slack = float(np.max(lhs - rhs))
                stale_worst = max(stale_worst, slack)
                if slack > BOUND_SLACK:
                    raise StateCorruptionError(f"staleness bound fails for agents {i + 1}, {j + 1}")

    drift_worst = -math.inf
    for j in range(n_players):
        if len(qt[j]) < 2:
            continue
        d = np.linalg.norm(np.diff(qt[j], axis=0), axis=1)
        s = np.arange(1, len(d) + 1)
        slack = float(np.max(d - SQRT2 / s))
        drift_worst = max(drift_worst, slack)
        if slack > BOUND_SLACK:
            raise StateCorruptionError(f"one-step drift bound fails for agent {j + 1}")

    return EmbeddedView(tau, sig, qt, q_hat, stale_worst, drift_worst)


# --------------------------------------------------------------------------
# continuous-time clocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousSchedule:
    """Per-agent action instants, each starting at 0 and strictly increasing, all at most ``T``."""

    instants: tuple
    T: float

    def __post_init__(self):
        inst = []
        for i, t in enumerate(self.instants):
            t = np.asarray(t, dtype=float)
            if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
                raise ConfigError(f"agent {i + 1}'s first instant must be 0", field="timing")
            if np.any(np.diff(t) <= 0):
                raise ConfigError(f"agent {i + 1}'s instants are not strictly increasing", field="timing")
            if t[-1] > self.T:
                raise ConfigError(f"agent {i + 1} has instants past T={self.T}", field="timing")
            t = t.copy()
            t.setflags(write=False)
            inst.append(t)
        object.__setattr__(self, "instants", tuple(inst))

    @property
    def num_agents(self) -> int:
        return len(self.instants)

    def counts_at(self, t: float, left: bool = False) -> np.ndarray:
        """``N_i(t)``, or the left limit ``N_i(t-)``."""
        side = "left" if left else "right"
        return np.array([np.searchsorted(x, t, side=side) for x in self.instants])

    def events(self) -> list[tuple[float, int, int]]:
        """``(time, agent, tick_index)`` sorted by time then agent."""
        ev = [(float(t), i, k + 1) for i, x in enumerate(self.instants) for k, t in enumerate(x)]
        ev.sort()
        return ev


def poisson_schedule(lam, T: float, rng: np.random.Generator, num_agents: Optional[int] = None) -> ContinuousSchedule:
    """Independent Poisson clocks with rate ``lam`` (scalar or per agent); every clock also fires at 0."""
    rates = np.atleast_1d(np.asarray(lam, dtype=float))
    if num_agents is not None and rates.size == 1:
        rates = np.full(num_agents, rates[0])
    if np.any(rates <= 0):
        raise ConfigError("Poisson rates must be positive", field="timing.params.lambda")
    if T <= 0:
        raise ConfigError("T must be positive", field="timing.T")
    instants = []
    for r in rates:
        chunk = max(16, int(r * T * 1.2) + 16)
        times = [0.0]
        last = 0.0
        while True:
            gaps = rng.exponential(1.0 / r, size=chunk)
            t = last + np.cumsum(gaps)
            keep = t[t <= T]
            times.extend(keep.tolist())
            if keep.size < t.size:
                break
            last = float(t[-1])
        instants.append(np.array(times))
    return ContinuousSchedule(tuple(instants), float(T))


def _check_budget(w0: np.ndarray, budget: np.ndarray) -> None:
    if np.any(w0 <= 0):
        raise ConfigError("base waiting times must be positive", field="timing.params.w0")
    if np.any(budget <= w0.max()):
        raise ConfigError(
            f"every budget must exceed the largest base waiting time {w0.max()}, got {budget.tolist()}",
            field="timing.params.B",
        )


def adaptive_schedule_step(i: int, tau_n: float, n_i: int, w_base: float, budget: float, n_min, max_ticks: int = 10**6) -> float:
    """Waiting time ``k * w_base`` for the smallest ``k >= 1`` with ``n_min(tau_n + k w_base) >= n_i - budget``.

    ``n_min(t)`` is the smallest action count over all agents just before
    ``t``; the agent only reads it at its own clock ticks.
    """
    for k in range(1, max_ticks + 1):
        if n_min(tau_n + k * w_base) >= n_i - budget:
            return k * w_base
    raise ConfigError(f"agent {i + 1} exceeded {max_ticks} ticks waiting for slower agents", field="timing.params.B")


def adaptive_schedule(w0: Sequence[float], budget, T: float) -> ContinuousSchedule:
    """Action instants under the throttling rule, simulated tick by tick.

    Every agent acts at 0. Agent ``i``'s clock then ticks every ``w0[i]``
    after its last action, and it acts at a tick once the minimum count
    before that tick is at least its own count minus ``budget[i]``.
    Ticks at the same instant read counts from before that instant.
    """
    w0 = np.asarray(w0, dtype=float)
    budget = np.broadcast_to(np.asarray(budget, dtype=float), w0.shape).copy()
    _check_budget(w0, budget)
    n = w0.size
    counts = np.ones(n, dtype=np.int64)
    instants = [[0.0] for _ in range(n)]
    last = np.zeros(n)
    ticks = np.ones(n, dtype=np.int64)
    heap = [(w0[i], i) for i in range(n)]
    heapq.heapify(heap)
    while heap and heap[0][0] <= T:
        t = heap[0][0]
        group = []
        while heap and heap[0][0] == t:
            group.append(heapq.heappop(heap)[1])
        n_min = counts.min()
        acting = [i for i in sorted(group) if n_min >= counts[i] - budget[i]]
        for i in sorted(group):
            if i in acting:
                instants[i].append(t)
                last[i] = t
                ticks[i] = 1
            else:
                ticks[i] += 1
            heapq.heappush(heap, (last[i] + ticks[i] * w0[i], i))
        for i in acting:
            counts[i] += 1
    return ContinuousSchedule(tuple(np.array(x) for x in instants), float(T))


def deterministic_schedule(w0: Sequence[float], T: float) -> ContinuousSchedule:
    """Unthrottled clocks acting at ``0, w, 2w, ...``."""
    instants = []
    for w in w0:
        k = int(math.floor(T / w + 1e-9))
        instants.append(np.arange(k + 1) * float(w))
    return ContinuousSchedule(tuple(instants), float(T))


# --------------------------------------------------------------------------
# continuous-time play
# --------------------------------------------------------------------------

EVENT_COLUMNS = ("event", "agent", "tick_index", "wall_time", "action", "N_i", "N_min")


@dataclass
class EventTrace:
    """One row per action instant, in processing order.

    Counts are taken just after the event. ``states[k]`` holds the profile of
    empirical frequencies after event ``k``. ``nash_gap`` is sampled on the
    last event of every ``stride``-th distinct instant and at the end.
    """

    game: Game
    schedule: ContinuousSchedule
    agent: np.ndarray
    tick_index: np.ndarray
    wall_time: np.ndarray
    action: np.ndarray
    n_i: np.ndarray
    n_min: np.ndarray
    states: np.ndarray
    nash_gap: np.ndarray
    seed: Optional[int] = None
    info: dict = field(default_factory=dict)

    @property
    def num_events(self) -> int:
        return int(self.agent.size)

    def empirical(self) -> tuple[np.ndarray, ...]:
        return tuple(self.states[-1, b].copy() for b in _player_blocks(self.game))

    def final_nash_gap(self) -> float:
        return nash_gap(self.game, self.empirical()).nash_gap

    def counts(self) -> np.ndarray:
        """Per-agent action counts after each event (events by agents array)."""
        out = np.zeros((self.num_events, self.game.num_players), dtype=np.int64)
        running = np.zeros(self.game.num_players, dtype=np.int64)
        for k, i in enumerate(self.agent):
            running[i] += 1
            out[k] = running
        return out

    def columns(self) -> list[str]:
        labels = [f"q_p{i + 1}_a{a + 1}" for i, c in enumerate(self.game.action_counts) for a in range(c)]
        return list(EVENT_COLUMNS) + labels + ["nash_gap"]

    def rows(self):
        from .io import fmt

        for k in range(self.num_events):
            row = [
                str(k + 1),
                str(int(self.agent[k]) + 1),
                str(int(self.tick_index[k])),
                fmt(self.wall_time[k]),
                str(int(self.action[k]) + 1),
                str(int(self.n_i[k])),
                str(int(self.n_min[k])),
            ]
            row += [fmt(v) for v in self.states[k]]
            row.append(fmt(self.nash_gap[k]))
            yield row


def ct_embed_run(
    game: Game,
    schedule: ContinuousSchedule,
    selector: str = "sticky",
    seed: int = 0,
    stride: int = 10,
    initial_actions=None,
) -> EventTrace:
    """Continuous-time FP over the given action instants.

    The first action of each agent (at time 0) is the initial profile; later
    actions best respond to the opponents' frequencies just before the
    instant. Simultaneous events are processed in agent order against the
    same pre-instant frequencies.
    """
    if schedule.num_agents != game.num_players:
        raise ConfigError(f"schedule has {schedule.num_agents} agents, game has {game.num_players}", field="timing")
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; expected one of {SELECTORS}", field="selector")
    if stride < 1:
        raise ConfigError("stride must be at least 1", field="stride")
    rng = np.random.default_rng(seed)
    n_players = game.num_players
    init = initial_profile(game, initial_actions)
    events = schedule.events()
    m = len(events)
    blocks = _player_blocks(game)
    dim = sum(game.action_counts)

    agent = np.empty(m, dtype=np.int64)
    tick = np.empty(m, dtype=np.int64)
    wall = np.empty(m)
    act = np.empty(m, dtype=np.int64)
    n_i = np.empty(m, dtype=np.int64)
    n_min = np.empty(m, dtype=np.int64)
    states = np.empty((m, dim))
    gaps = np.full(m, np.nan)

    sums = [np.zeros(k) for k in game.action_counts]
    counts = np.zeros(n_players, dtype=np.int64)
    q = [np.full(k, np.nan) for k in game.action_counts]
    last = list(init)
    k = 0
    instant = 0
    while k < m:
        t = events[k][0]
        end = k
        while end < m and events[end][0] == t:
            end += 1
        chosen = []
        for e in range(k, end):
            _, i, ti = events[e]
            if ti == 1:
                a = init[i]
            else:
                others = tuple(q[j] for j in range(n_players) if j != i)
                a, _ = respond(game, i, others, 0.0, selector, last[i], rng)
            chosen.append((e, i, ti, a))
        for e, i, ti, a in chosen:
            sums[i][a] += 1.0
            counts[i] += 1
            q[i] = sums[i] / counts[i]
            last[i] = a
            agent[e], tick[e], wall[e], act[e] = i, ti, t, a
            n_i[e] = counts[i]
            n_min[e] = counts.min()
            for j, b in enumerate(blocks):
                states[e, b] = q[j]
        instant += 1
        if counts.min() > 0 and (instant % stride == 0 or end == m):
            gaps[end - 1] = nash_gap(game, tuple(q)).nash_gap
        k = end
    return EventTrace(game, schedule, agent, tick, wall, act, n_i, n_min, states, gaps, seed)


# --------------------------------------------------------------------------
# synchrony diagnostics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SynchronyReport:
    min_ratio: float
    max_ratio: float
    max_abs_diff: int
    final_counts: tuple
    decile_increments: tuple
    flags: tuple
    tolerance: float

    @property
    def passed(self) -> bool:
        return not self.flags


def synchrony_report(counts, tolerance: float = 0.05) -> SynchronyReport:
    """Summarize how evenly agents act from a (times by agents) count series.

    Flags ``stalled_agent`` when some agent did not act during the last
    decile of the series and ``rate_divergence`` when a pairwise count ratio
    at the end leaves ``[1 - tolerance, 1 + tolerance]``.
    """
    c = np.asarray(counts, dtype=float)
    if c.ndim != 2 or c.shape[0] < 1:
        raise ValueError("counts must be a nonempty times-by-agents array")
    final = c[-1]
    if np.any(final <= 0):
        raise ValueError("every agent must have acted at least once")
    ratios = final[:, None] / final[None, :]
    start = c[int(0.9 * (c.shape[0] - 1))]
    incr = final - start
    flags = []
    if c.shape[0] > 1 and np.any(incr == 0):
        flags.append("stalled_agent")
    if ratios.min() < 1.0 - tolerance or ratios.max() > 1.0 + tolerance:
        flags.append("rate_divergence")
    diff = int(np.max(c.max(axis=1) - c.min(axis=1)))
    return SynchronyReport(
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        max_abs_diff=diff,
        final_counts=tuple(int(x) for x in final),
        decile_increments=tuple(int(x) for x in incr),
        flags=tuple(flags),
        tolerance=tolerance,
    )


def max_count_gap(schedule: ContinuousSchedule) -> int:
    """``max_t max_{i,j} |N_i(t) - N_j(t)|``; counts only change at instants, so those suffice."""
    times = np.unique(np.concatenate(schedule.instants))
    c = np.stack([np.searchsorted(x, times, side="right") for x in schedule.instants], axis=1)
    return int(np.max(c.max(axis=1) - c.min(axis=1)))
