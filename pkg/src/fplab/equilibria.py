"""Equilibrium oracles and structural checks on games."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import OracleOutOfRange, PresetRefused
from .game import Game, Product, action_values, nash_gap

POTENTIAL_TOL = 1e-9
NE_GAP_TOL = 1e-8
MAX_ORACLE_ACTIONS = 4


def _nonempty_subsets(n):
    for k in range(1, n + 1):
        yield from itertools.combinations(range(n), k)


def _indifference_mix(payoff: np.ndarray, rows, cols):
    """Solve for a mix over ``cols`` making every row in ``rows`` indifferent.

    ``payoff[r, c]`` is the payoff of the row player. Returns the full-length
    mixed strategy over columns, or ``None`` when the system has no unique
    nonnegative solution.
    """
    k, m = len(rows), len(cols)
    a = np.zeros((k + 1, m + 1))
    a[:k, :m] = payoff[np.ix_(rows, cols)]
    a[:k, m] = -1.0
    a[k, :m] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    if np.linalg.matrix_rank(a) < m + 1:
        return None
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ sol - b)) > 1e-10:
        return None
    mix = sol[:m]
    if np.any(mix < -1e-12):
        return None
    out = np.zeros(payoff.shape[1])
    out[list(cols)] = np.clip(mix, 0.0, None)
    return out / out.sum()


def enumerate_ne_2xm(game: Game) -> list[Product]:
    """All Nash equilibria of a small two-player game by support enumeration.

    Every pair of supports is tried; a candidate is kept when both
    indifference systems have unique nonnegative solutions and the resulting
    profile has no profitable deviation. Degenerate games with continua of
    equilibria only yield the isolated points found this way.
    """
    if game.num_players != 2 or max(game.action_counts) > MAX_ORACLE_ACTIONS:
        raise OracleOutOfRange(
            f"oracle out of range: needs 2 players with at most {MAX_ORACLE_ACTIONS} actions each, "
            f"got action counts {game.action_counts}"
        )
    a = game.utilities[0]
    b = game.utilities[1]
    m1, m2 = game.action_counts
    found: list[Product] = []
    for s1 in _nonempty_subsets(m1):
        for s2 in _nonempty_subsets(m2):
            # player 2's mix makes player 1 indifferent over s1, and vice versa
            q = _indifference_mix(a, s1, s2)
            if q is None:
                continue
            p = _indifference_mix(b.T, s2, s1)
            if p is None:
                continue
            profile = (p, q)
            if nash_gap(game, profile).nash_gap > NE_GAP_TOL:
                continue
            if not any(_close(profile, other) for other in found):
                found.append(profile)
    return found


def _close(a: Product, b: Product, tol: float = 1e-9) -> bool:
    return all(np.max(np.abs(x - y)) <= tol for x, y in zip(a, b))


def distance_to_set(p: Product, points: list[Product]) -> float:
    """Euclidean distance from a product strategy to a finite set of them."""
    if not points:
        return math.inf
    flat = np.concatenate(p)
    return min(float(np.linalg.norm(flat - np.concatenate(q))) for q in points)


def is_exact_potential(game: Game, return_potential: bool = False):
    """Decide whether ``game`` admits an exact potential.

    The candidate potential is fixed at zero on the first joint action and
    propagated along unilateral deviations; every deviation edge is then
    checked against it.
    """
    counts = game.action_counts
    u = game.utilities
    phi = np.full(counts, np.nan)
    start = (0,) * len(counts)
    phi[start] = 0.0
    queue = deque([start])
    while queue:
        y = queue.popleft()
        for i, k in enumerate(counts):
            for a in range(k):
                z = y[:i] + (a,) + y[i + 1:]
                if np.isnan(phi[z]):
                    phi[z] = phi[y] + u[i][z] - u[i][y]
                    queue.append(z)
    ok = True
    for i in range(len(counts)):
        # potential differences along player i's axis must match theirs
        dphi = phi - np.take(phi, [0], axis=i)
        du = u[i] - np.take(u[i], [0], axis=i)
        if np.max(np.abs(dphi - du)) > POTENTIAL_TOL:
            ok = False
            break
    if return_potential:
        return ok, (phi if ok else None)
    return ok


@dataclass(frozen=True)
class InvarianceCheck:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def permutation_invariance_check(game: Game, max_full: int = 4, samples: int = 200, seed: int = 0) -> InvarianceCheck:
    """Check that all players share one permutation-invariant utility.

    Tests ``u_i(y) == u_{pi(i)}(pi . y)`` for every permutation of players
    when ``N <= max_full``; larger games are checked on adjacent
    transpositions plus ``samples`` random permutations.
    """
    counts = game.action_counts
    if len(set(counts)) != 1:
        return InvarianceCheck(False, f"players have different action counts {counts}")
    n = game.num_players
    u = game.utilities
    if n <= max_full:
        perms = itertools.permutations(range(n))
    else:
        rng = np.random.default_rng(seed)
        transpositions = []
        for i in range(n - 1):
            p = list(range(n))
            p[i], p[i + 1] = p[i + 1], p[i]
            transpositions.append(tuple(p))
        perms = transpositions + [tuple(rng.permutation(n)) for _ in range(samples)]
    for perm in perms:
        for i in range(n):
            # transposed[y] == u_{perm[i]} at the joint action where perm[k] plays y_k
            if not np.allclose(np.transpose(u[perm[i]], perm), u[i], rtol=0.0, atol=1e-12):
                return InvarianceCheck(False, f"u_{i + 1} differs from u_{perm[i] + 1} under permutation {perm}")
    return InvarianceCheck(True)


def _require_symmetric(game: Game) -> None:
    check = permutation_invariance_check(game)
    if not check:
        raise PresetRefused(f"game is not symmetric with a shared permutation-invariant utility: {check.reason}")


def cne_gap_unchecked(game: Game, centroid) -> float:
    c = np.asarray(centroid, dtype=float)
    n = game.num_players
    gap = 0.0
    for i in range(n):
        v = action_values(game, i, (c,) * (n - 1))
        gap = max(gap, float(v.max() - v @ c))
    return gap


def mce_gap_unchecked(game: Game, p: Product) -> float:
    n = game.num_players
    mean = np.mean(np.stack(p), axis=0)
    gap = 0.0
    for i in range(n):
        v = action_values(game, i, (mean,) * (n - 1))
        gap = max(gap, float(v.max() - v @ p[i]))
    return gap


def cne_gap(game: Game, centroid) -> float:
    """Deviation gain at the symmetric profile where everyone plays ``centroid``.

    Zero exactly when that symmetric profile is a Nash equilibrium.
    """
    _require_symmetric(game)
    return cne_gap_unchecked(game, centroid)


def mce_gap(game: Game, p: Product) -> float:
    """Largest gain of a player deviating against copies of the average strategy."""
    _require_symmetric(game)
    return mce_gap_unchecked(game, p)
