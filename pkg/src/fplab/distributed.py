"""Distributed FP-type play over a communication graph.

Agents see only their own actions. Each keeps a local estimate of the
observation state, best-responds to the forecast built from it, and mixes
information with its neighbors once per round. The observation map must be
separable: ``g(y) = sum_j c_j(y_j)`` with ``c_j`` computable by agent ``j``.

Every agent ``j`` carries an auxiliary vector ``a^j`` whose agent-average
equals the true state ``z(n)``. After choosing its action, agent ``j``
injects ``gamma(n) * (N c_j(y_j) - a^j)`` and the injected vectors are mixed
by the round's protocol. Estimates are ``a^i`` projected block-wise onto the
observation space, with the agent's own block (when it has one) replaced by
its exact own empirical.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algorithms import FPTypeAlgorithm
from .engine import SELECTORS, MetricRecorder, RunTrace, check_finite, initial_profile, respond
from .errors import ConfigError, RunAborted
from .game import Game, action_values, utility_range
from .schedules import PerturbationSchedule

GRAPH_MODELS = ("static", "iid_drop", "gossip", "switching")
PROTOCOLS = ("running_consensus", "gossip")
STOCHASTIC_TOL = 1e-9


def named_edges(name: str, n: int) -> list[tuple[int, int]]:
    if name == "complete":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if name == "ring":
        if n < 3:
            return named_edges("path", n)
        return [(i, (i + 1) % n) if i < n - 1 else (0, n - 1) for i in range(n)]
    if name == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if name == "star":
        return [(0, j) for j in range(1, n)]
    if name == "edgeless":
        return []
    raise ConfigError(f"unknown topology {name!r}", field="graph.edges")


def _normalize_edges(edges, n: int) -> tuple[tuple[int, int], ...]:
    if isinstance(edges, str):
        edges = named_edges(edges, n)
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise ConfigError(f"self-loop at node {i}", field="graph.edges")
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"edge {(i, j)} outside nodes 0..{n - 1}", field="graph.edges")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


def is_connected(n: int, edges) -> bool:
    if n <= 1:
        return True
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        for j in adj[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


@dataclass(frozen=True)
class CommGraph:
    """Undirected graph plus a per-round edge activation model.

    ``static`` activates every edge, ``iid_drop`` drops each edge
    independently with probability ``rho``, ``gossip`` activates one
    uniformly random edge, and ``switching`` cycles through ``topologies``
    holding each for ``period`` rounds. Edges may be given as pairs or as a
    topology name (ring, complete, path, star, edgeless).
    """

    nodes: int
    edges: tuple = ()
    model: str = "static"
    rho: float = 0.0
    period: int = 1
    topologies: tuple = ()
    window: int = 10

    def __post_init__(self):
        if self.nodes < 1:
            raise ConfigError("graph needs at least one node", field="graph.nodes")
        if self.model not in GRAPH_MODELS:
            raise ConfigError(f"unknown graph model {self.model!r}; expected one of {GRAPH_MODELS}", field="graph.model")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"drop probability must lie in [0, 1), got {self.rho}", field="graph.rho")
        if self.period < 1:
            raise ConfigError("switching period must be at least 1", field="graph.period")
        if self.window < 1:
            raise ConfigError("connectivity window must be at least 1", field="graph.window")
        object.__setattr__(self, "edges", _normalize_edges(self.edges, self.nodes))
        tops = tuple(_normalize_edges(t, self.nodes) for t in self.topologies)
        object.__setattr__(self, "topologies", tops)
        if self.model == "switching" and not tops:
            raise ConfigError("switching model needs at least one topology", field="graph.topologies")

    @classmethod
    def from_config(cls, doc: dict, nodes: Optional[int] = None) -> "CommGraph":
        n = int(doc.get("nodes", nodes if nodes is not None else 0))
        if nodes is not None and n != nodes:
            raise ConfigError(f"graph has {n} nodes but the game has {nodes} players", field="graph.nodes")
        return cls(
            nodes=n,
            edges=doc.get("edges", "complete"),
            model=doc.get("model", "static"),
            rho=float(doc.get("rho", 0.0)),
            period=int(doc.get("period", 1)),
            topologies=tuple(doc.get("topologies", ())),
            window=int(doc.get("window", 10)),
        )

    def active_edges(self, n: int, rng: np.random.Generator) -> tuple:
        """Edges active in round ``n >= 1``."""
        if self.model == "static":
            return self.edges
        if self.model == "iid_drop":
            keep = rng.random(len(self.edges)) >= self.rho
            return tuple(e for e, k in zip(self.edges, keep) if k)
        if self.model == "gossip":
            if not self.edges:
                return ()
            return (self.edges[int(rng.integers(len(self.edges)))],)
        tops = self.topologies
        return tops[((n - 1) // self.period) % len(tops)]


def metropolis_weights(n: int, edges) -> np.ndarray:
    """Symmetric doubly stochastic mixing matrix ``W_ij = 1 / (1 + max(d_i, d_j))``."""
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    w = np.zeros((n, n))
    for i, j in edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    return w


def check_doubly_stochastic(w: np.ndarray, tol: float = STOCHASTIC_TOL) -> None:
    rows = np.max(np.abs(w.sum(axis=1) - 1.0))
    cols = np.max(np.abs(w.sum(axis=0) - 1.0))
    if rows > tol or cols > tol or w.min() < -tol:
        raise RunAborted(f"mixing matrix is not doubly stochastic (row err {rows:.3g}, col err {cols:.3g})")


def protocol_running_consensus(states: np.ndarray, injections: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``a_i <- sum_j W_ij (a_j + inj_j)``; ``weights`` must already be doubly stochastic."""
    return weights @ (states + injections)


def protocol_async_gossip(states: np.ndarray, injections: np.ndarray, edge: Optional[tuple[int, int]]) -> np.ndarray:
    """Everyone injects; the two endpoints of ``edge`` then replace their vectors by the pair average."""
    out = states + injections
    if edge is not None:
        i, j = edge
        mid = 0.5 * (out[i] + out[j])
        out[i] = mid
        out[j] = mid
    return out


def lipschitz_bounds(game: Game) -> np.ndarray:
    """Per-player ``L_i`` with ``|U_i(a, f) - U_i(a, f')| `` differences bounded by ``L_i |z - z'|_inf``.

    Payoff gaps between two own actions are at most the utility range, and a
    sup-norm change of ``e`` in every opponent block moves the product
    distribution by at most ``e * sum_k |Y_k|`` in l1.
    """
    n = game.num_players
    return np.array([utility_range(game, i) * sum(game.opponent_counts(i)) for i in range(n)])


@dataclass
class DistributedState:
    """Auxiliary consensus vectors (one row per agent) and the derived estimates."""

    aux: np.ndarray
    estimates: np.ndarray


class DistributedProcess:
    """Stepper for distributed FP-type play; see :func:`distributed_run`."""

    def __init__(self, algo: FPTypeAlgorithm, game: Game, graph: CommGraph, protocol: str = "running_consensus"):
        if not algo.separable:
            raise ConfigError(
                f"algorithm {algo.name!r} has a non-separable observation map; no single agent can compute its part",
                field="algorithm",
            )
        if protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}", field="protocol")
        if graph.nodes != game.num_players:
            raise ConfigError(f"graph has {graph.nodes} nodes, game has {game.num_players} players", field="graph.nodes")
        algo.check_game(game)
        self.algo = algo
        self.game = game
        self.graph = graph
        self.protocol = protocol
        self.n = game.num_players
        self._weights = {}
        self._contrib = [
            [self.n * algo.contribution(j, a) for a in range(game.action_counts[j])] for j in range(self.n)
        ]
        self._own = None if algo.own_block is None else [algo.own_block(i) for i in range(self.n)]

    def contributions(self, actions) -> np.ndarray:
        return np.stack([self._contrib[j][a] for j, a in enumerate(actions)])

    def estimate(self, aux: np.ndarray, z: np.ndarray) -> np.ndarray:
        est = self.algo.space.project_rows(aux)
        if self._own is not None:
            for i, blk in enumerate(self._own):
                est[i, blk] = z[blk]
        return est

    def initial_state(self, actions, z: np.ndarray, init: str = "uniform") -> DistributedState:
        if init == "uniform":
            aux = self.contributions(actions)
        elif init == "exact":
            aux = np.tile(z, (self.n, 1))
        else:
            raise ConfigError(f"unknown estimate initialization {init!r}", field="init")
        return DistributedState(aux, self.estimate(aux, z))

    def weights(self, edges) -> np.ndarray:
        w = self._weights.get(edges)
        if w is None:
            w = metropolis_weights(self.n, edges)
            check_doubly_stochastic(w)
            if len(self._weights) < 4096:
                self._weights[edges] = w
        return w

    def mix(self, aux, injections, edges) -> np.ndarray:
        if self.protocol == "running_consensus":
            return protocol_running_consensus(aux, injections, self.weights(edges))
        return protocol_async_gossip(aux, injections, edges[0] if edges else None)


def distributed_step(
    proc: DistributedProcess,
    state: DistributedState,
    z: np.ndarray,
    n: int,
    gamma_n: float,
    eps_n: float,
    selector: str,
    previous,
    rng: np.random.Generator,
):
    """One round: respond to own estimates, update the true state, exchange.

    Returns ``(actions, new_state, z_next, errors, subopt_vs_estimate, edges)``.
    """
    actions = []
    subopt = np.empty(proc.n)
    for i in range(proc.n):
        a, s = respond(proc.game, i, proc.algo.f(i, state.estimates[i]), eps_n, selector, previous[i], rng)
        actions.append(a)
        subopt[i] = s
    actions = tuple(actions)
    z_next = z + gamma_n * (proc.algo.g_pure(actions) - z)
    injections = gamma_n * (proc.contributions(actions) - state.aux)
    edges = proc.graph.active_edges(n, rng)
    aux = proc.mix(state.aux, injections, edges)
    est = proc.estimate(aux, z_next)
    errors = np.max(np.abs(est - z_next), axis=1)
    return actions, DistributedState(aux, est), z_next, errors, subopt, edges


@dataclass
class ConnectivityLog:
    window: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def distributed_run(
    algo: FPTypeAlgorithm,
    game: Game,
    graph: CommGraph,
    horizon: int,
    protocol: str = "running_consensus",
    perturb: PerturbationSchedule | None = None,
    selector: str = "sticky",
    seed: int = 0,
    metrics: Sequence[str] = ("nash_gap",),
    stride: int = 10,
    initial_actions=None,
    init: str = "uniform",
) -> RunTrace:
    """Simulate distributed play; the trace gains ``max_est_error`` and ``est_error_i`` columns.

    Row ``k`` of the error columns is ``|zhat^i(k+1) - z(k+1)|_inf``. After
    every round the true suboptimality of each action against the exact
    forecast is checked against ``L_i * e_i + eps_n``. Windows of
    ``graph.window`` rounds whose union of active edges is disconnected are
    listed in ``trace.info["connectivity_violations"]``.
    """
    if horizon < 1:
        raise ConfigError("horizon must be at least 1", field="horizon")
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; expected one of {SELECTORS}", field="selector")
    proc = DistributedProcess(algo, game, graph, protocol)
    perturb = perturb or PerturbationSchedule()
    rng = np.random.default_rng(seed)
    n_players = game.num_players
    lips = lipschitz_bounds(game)

    actions = np.zeros((horizon, n_players), dtype=np.int64)
    states = np.zeros((horizon, algo.space.dim))
    gammas = algo.schedule.values(horizon - 1) if horizon > 1 else np.zeros(0)
    eps = np.full(horizon, np.nan)
    subopt = np.full((horizon, n_players), np.nan)
    errors = np.zeros((horizon, n_players))
    recorder = MetricRecorder(game, metrics, horizon, stride)
    conn = ConnectivityLog(graph.window)
    window_edges: set = set()

    prev = initial_profile(game, initial_actions)
    z = algo.g_pure(prev)
    st = proc.initial_state(prev, z, init)
    actions[0] = prev
    states[0] = z
    errors[0] = np.max(np.abs(st.estimates - z), axis=1)
    tallies = [np.zeros(k) for k in game.action_counts]
    for i, a in enumerate(prev):
        tallies[i][a] += 1.0
    recorder.record(0, tallies)

    for k in range(1, horizon):
        n = k
        eps_n = perturb(n)
        z_prev = z
        prev, st, z, err, _, edges = distributed_step(proc, st, z, n, gammas[k - 1], eps_n, selector, prev, rng)
        check_finite(z, n + 1)
        check_finite(st.aux.reshape(-1), n + 1)
        # true suboptimality against the exact forecast must respect the error bound
        for i, a in enumerate(prev):
            v = action_values(game, i, algo.f(i, z_prev))
            s = float(v.max() - v[a])
            subopt[k, i] = s
            bound = lips[i] * errors[k - 1, i] + eps_n + 1e-9
            if s > bound:
                raise RunAborted(
                    f"agent {i + 1} lost {s:.3g} > bound {bound:.3g} at iteration {n}", iteration=n, component=i
                )
            tallies[i][a] += 1.0
        actions[k] = prev
        states[k] = z
        eps[k] = eps_n
        errors[k] = err
        window_edges.update(edges)
        if k % graph.window == 0:
            if not is_connected(n_players, window_edges):
                conn.violations.append(k // graph.window)
            window_edges = set()
        if recorder.mask[k]:
            recorder.record(k, [t / (k + 1) for t in tallies])

    extra = {"max_est_error": errors.max(axis=1)}
    for i in range(n_players):
        extra[f"est_error_{i + 1}"] = errors[:, i]
    trace = RunTrace(
        game=game,
        algorithm=algo.name,
        space_labels=algo.space.labels,
        actions=actions,
        states=states,
        gammas=gammas,
        eps=eps,
        realized_subopt=subopt,
        metrics=recorder.values,
        empirical=tuple(t / horizon for t in tallies),
        seed=seed,
        extra_columns=extra,
    )
    trace.info["connectivity_violations"] = conn.violations
    trace.info["connectivity_window"] = graph.window
    return trace


def error_series(trace: RunTrace) -> np.ndarray:
    """``max_i |zhat^i(n) - z(n)|_inf`` for every row of a distributed trace."""
    try:
        return trace.extra_columns["max_est_error"]
    except KeyError:
        raise ValueError("trace has no estimate-error columns; it was not produced by distributed_run") from None

