"""Continuous-time interpolation of traces and numerical eps-to-delta certificates.

A certificate checks, on a finite set of observation states, that every pure
profile in the eps-best-response set of ``z`` is an exact best response to
some nearby ``z'``. The largest displacement needed is an empirical upper
bound on the uniform delta matching that eps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algorithms import FPTypeAlgorithm
from .engine import RunTrace
from .game import TIE_TOL, Game, action_values, epsilon_best_response_set

DEFAULT_RADII = (0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5)
DEFAULT_DIRECTIONS = 32


@dataclass(frozen=True)
class InterpolatedPath:
    """Piecewise-linear path through ``values[k]`` at ``times[k]``.

    ``times[0] == 0`` and ``times[k] = gamma(1) + ... + gamma(k)``; ``values[k]``
    is the observation state ``z(k+1)``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.shape[0] != self.values.shape[0]:
            raise ValueError("times and values must have matching lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("knot times must be strictly increasing")

    def __call__(self, t: float) -> np.ndarray:
        times = self.times
        if not times[0] <= t <= times[-1]:
            raise ValueError(f"time {t} outside [{times[0]}, {times[-1]}]")
        k = int(np.searchsorted(times, t, side="right")) - 1
        if times[k] == t or k == len(times) - 1:
            return self.values[k].copy()
        s = (t - times[k]) / (times[k + 1] - times[k])
        return self.values[k] + s * (self.values[k + 1] - self.values[k])

    @property
    def end(self) -> float:
        return float(self.times[-1])


def interpolate(trace: RunTrace) -> InterpolatedPath:
    if trace.horizon < 1:
        raise ValueError("cannot interpolate an empty trace")
    times = np.concatenate(([0.0], np.cumsum(trace.gammas)))
    return InterpolatedPath(times, trace.states.copy())


# --------------------------------------------------------------------------
# eps -> delta certification
# --------------------------------------------------------------------------


def sup_dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def is_best_response_profile(game: Game, algo: FPTypeAlgorithm, z: np.ndarray, actions: Sequence[int]) -> bool:
    """True when every ``actions[i]`` is a best response to ``f_i(z)``."""
    for i, a in enumerate(actions):
        v = action_values(game, i, algo.f(i, z))
        if v[a] < v.max() - TIE_TOL:
            return False
    return True


def eps_br_vertices(game: Game, algo: FPTypeAlgorithm, z: np.ndarray, eps: float) -> list[tuple[int, ...]]:
    """Pure profiles of the product eps-best-response set at ``z``."""
    sets = [sorted(epsilon_best_response_set(game, i, algo.f(i, z), eps)) for i in range(game.num_players)]
    return list(itertools.product(*sets))


@dataclass(frozen=True)
class Witness:
    sample: int
    z: np.ndarray
    actions: tuple[int, ...]
    z_prime: Optional[np.ndarray]
    delta: float


@dataclass
class DeltaCertificate:
    """Worst-case displacement over samples needed to turn eps-BRs into exact BRs.

    ``per_sample[k]`` is the largest, over pure eps-BR profiles ``x`` at sample
    ``k``, of the smallest sup-norm move ``|z - z'|`` found with ``x`` in
    ``BR(z')``. The witness strategy is ``x`` itself, so the strategy distance
    is zero. Failed searches give ``inf`` and are listed in ``flagged``.
    """

    eps: float
    delta_min: float
    samples: np.ndarray
    per_sample: np.ndarray
    witnesses: list = field(repr=False)
    flagged: tuple[int, ...] = ()

    @property
    def worst_sample_index(self) -> int:
        if len(self.per_sample) == 0:
            return -1
        return int(np.argmax(self.per_sample))

    def verify(self, game: Game, algo: FPTypeAlgorithm, tol: float = 1e-12) -> bool:
        """Recheck every witness: BR membership at ``z'`` and the stored distances."""
        for w in self.witnesses:
            if w.z_prime is None:
                continue
            if not is_best_response_profile(game, algo, w.z_prime, w.actions):
                return False
            if sup_dist(w.z, w.z_prime) > w.delta + tol or w.delta > self.delta_min + tol:
                return False
        return True


def _tie_line_move(game: Game, algo: FPTypeAlgorithm, z: np.ndarray, actions) -> np.ndarray:
    """Exact smallest move for two players with two actions on the profile space.

    Each player's preference depends only on the opponent's block, a point on
    a segment; when ``actions[i]`` is not a best response the opponent block
    moves to the indifference point, where both actions are.
    """
    zp = z.copy()
    space = algo.space
    for i, a in enumerate(actions):
        j = 1 - i
        blk = space.block(j)
        v = action_values(game, i, (z[blk],))
        if v[a] >= v.max() - TIE_TOL:
            continue
        # payoff difference of action a over the other, linear in p = z_j[0]
        d0 = action_values(game, i, (np.array([1.0, 0.0]),))
        d1 = action_values(game, i, (np.array([0.0, 1.0]),))
        h0 = d0[a] - d0[1 - a]
        h1 = d1[a] - d1[1 - a]
        p = h1 / (h1 - h0)
        zp[blk] = (p, 1.0 - p)
    return zp


def _grid_move(game, algo, z, actions, radii, directions) -> Optional[np.ndarray]:
    best = None
    best_d = math.inf
    for r in radii:
        cands = [z] if r == 0.0 else [algo.space.project(z + r * d) for d in directions]
        for zp in cands:
            if is_best_response_profile(game, algo, zp, actions):
                d = sup_dist(z, zp)
                if d < best_d:
                    best, best_d = zp, d
        if best is not None:
            return best
    return None


def _uses_tie_line(game: Game, algo: FPTypeAlgorithm) -> bool:
    return algo.space.kind == "profile" and tuple(game.action_counts) == (2, 2)


def certify_eps_delta(
    game: Game,
    algo: FPTypeAlgorithm,
    eps: float,
    z_samples,
    radii: Sequence[float] = DEFAULT_RADII,
    num_directions: int = DEFAULT_DIRECTIONS,
    seed: int = 0,
    exact_2x2: bool = True,
) -> DeltaCertificate:
    """Certify that eps-BRs at each sample are exact BRs at some nearby state."""
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    samples = np.atleast_2d(np.asarray(z_samples, dtype=float))
    for z in samples:
        algo.space.check(z, what="sample")
    rng = np.random.default_rng(seed)
    directions = rng.uniform(-1.0, 1.0, size=(num_directions, algo.space.dim))
    directions /= np.max(np.abs(directions), axis=1, keepdims=True)
    tie_line = exact_2x2 and _uses_tie_line(game, algo)

    per_sample = np.zeros(len(samples))
    witnesses = []
    flagged = []
    for k, z in enumerate(samples):
        worst = None
        for x in eps_br_vertices(game, algo, z, eps):
            if is_best_response_profile(game, algo, z, x):
                zp = z
            elif tie_line:
                zp = _tie_line_move(game, algo, z, x)
            else:
                zp = _grid_move(game, algo, z, x, radii, directions)
            d = math.inf if zp is None else sup_dist(z, zp)
            if worst is None or d > worst.delta:
                worst = Witness(k, z.copy(), tuple(x), None if zp is None else zp.copy(), d)
        per_sample[k] = worst.delta
        witnesses.append(worst)
        if math.isinf(worst.delta):
            flagged.append(k)
    delta_min = float(per_sample.max()) if len(per_sample) else 0.0
    return DeltaCertificate(eps, delta_min, samples, per_sample, witnesses, tuple(flagged))


def profile_grid(counts: Sequence[int], points: Sequence[int]) -> np.ndarray:
    """Profile-space states on a product grid, for two-action players.

    ``points[i]`` evenly spaced values of player ``i``'s first-action weight
    in [0, 1] are combined over all players.
    """
    if any(k != 2 for k in counts):
        raise ValueError("profile_grid handles two-action players only")
    axes = [np.linspace(0.0, 1.0, m) for m in points]
    rows = []
    for ps in itertools.product(*axes):
        rows.append(np.concatenate([(p, 1.0 - p) for p in ps]))
    return np.array(rows)


def random_states(algo: FPTypeAlgorithm, num: int, seed: int = 0) -> np.ndarray:
    """Uniformly random points of the observation space (Dirichlet(1) per block)."""
    rng = np.random.default_rng(seed)
    blocks = [rng.dirichlet(np.ones(k), size=num) for k in algo.space.blocks]
    return np.concatenate(blocks, axis=1)


def certify_sweep(game, algo, eps_values, z_samples, **kwargs) -> list[DeltaCertificate]:
    return [certify_eps_delta(game, algo, e, z_samples, **kwargs) for e in eps_values]


CERTIFY_COLUMNS = ("eps", "delta_min", "worst_sample_index", "samples_flagged_infinite")


def certificate_rows(certs: Sequence[DeltaCertificate]):
    from .io import fmt

    for c in certs:
        yield [fmt(c.eps), fmt(c.delta_min), str(c.worst_sample_index), str(len(c.flagged))]
