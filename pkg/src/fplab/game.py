"""Finite normal-form games, mixed strategies, utilities and best responses.

Conventions used throughout the package:

* A game with ``N`` players stores its payoffs as one array of shape
  ``(N, |Y_1|, ..., |Y_N|)``; ``utilities[i][y]`` is player ``i``'s payoff at
  joint action ``y``. Flattening a player's table in C order gives the
  lexicographic joint-action order (player 1 most significant).
* A *product* (independent) strategy is a ``tuple`` of 1-d marginals.
* A *correlated* strategy is an ``np.ndarray`` shaped like the joint action
  set it lives on.
* Players are indexed from 0.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError

TIE_TOL = 1e-12
NORMALIZE_TOL = 1e-6

Product = tuple  # tuple[np.ndarray, ...]
Strategy = Union[Product, np.ndarray]


# --------------------------------------------------------------------------
# simplex vectors and joint strategies
# --------------------------------------------------------------------------


def simplex(weights, size: int | None = None) -> np.ndarray:
    """Validate ``weights`` as a probability vector and return a normalized copy.

    Sums within ``NORMALIZE_TOL`` of one are renormalized; anything further off
    is rejected rather than silently rescaled.
    """
    w = np.array(weights, dtype=float).reshape(-1)
    if size is not None and w.size != size:
        raise DimensionError(f"expected {size} weights, got {w.size}")
    if w.size == 0:
        raise DimensionError("empty probability vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(w < -NORMALIZE_TOL):
        raise ValueError(f"negative probability mass: {w.min()!r}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > NORMALIZE_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1")
    return w / total


def pure(action: int, size: int) -> np.ndarray:
    """Indicator vector placing all mass on ``action``."""
    if not 0 <= action < size:
        raise DimensionError(f"action {action} out of range for {size} actions")
    e = np.zeros(size)
    e[action] = 1.0
    return e


def uniform(size: int) -> np.ndarray:
    return np.full(size, 1.0 / size)


def product(*marginals) -> Product:
    """Build a product strategy from per-player marginals."""
    return tuple(simplex(m) for m in marginals)


def pure_profile(game: "Game", actions: Sequence[int]) -> Product:
    return tuple(pure(a, k) for a, k in zip(actions, game.action_counts))


def joint_distribution(marginals: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of marginals, shaped like the joint action set."""
    out = np.ones(())
    for m in marginals:
        out = np.multiply.outer(out, np.asarray(m, dtype=float))
    return out


def correlated(table, shape: Sequence[int]) -> np.ndarray:
    """Validate a distribution over a joint action set of the given shape."""
    shape = tuple(int(s) for s in shape)
    arr = np.asarray(table, dtype=float)
    if arr.size != math.prod(shape):
        raise DimensionError(f"correlated strategy has {arr.size} entries, expected {math.prod(shape)}")
    return simplex(arr.reshape(-1)).reshape(shape)


# --------------------------------------------------------------------------
# the game itself
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Game:
    """Finite normal-form game with dense utility tables."""

    utilities: np.ndarray
    name: str = ""
    _by_player: tuple = field(init=False, repr=False, compare=False)
    _opp_counts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        u = np.array(self.utilities, dtype=float)
        if u.ndim < 2:
            raise DimensionError("utilities must have shape (N, |Y_1|, ..., |Y_N|)")
        n = u.shape[0]
        if u.ndim != n + 1:
            raise DimensionError(f"{n} players need {n} action axes, got {u.ndim - 1}")
        if any(k < 1 for k in u.shape[1:]):
            raise DimensionError("every player needs at least one action")
        if not np.all(np.isfinite(u)):
            raise ValueError("utility tables must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "utilities", u)
        # each player's table with the own-action axis moved to the front
        moved = []
        for i in range(n):
            t = np.ascontiguousarray(np.moveaxis(u[i], i, 0))
            t.setflags(write=False)
            moved.append(t)
        object.__setattr__(self, "_by_player", tuple(moved))
        counts = u.shape[1:]
        object.__setattr__(self, "_opp_counts", tuple(counts[:i] + counts[i + 1:] for i in range(n)))

    @property
    def num_players(self) -> int:
        return self.utilities.shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(self.utilities.shape[1:])

    @property
    def num_joint_actions(self) -> int:
        return math.prod(self.action_counts)

    def payoff(self, i: int) -> np.ndarray:
        return self.utilities[i]

    def opponents(self, i: int) -> tuple[int, ...]:
        return tuple(j for j in range(self.num_players) if j != i)

    def opponent_counts(self, i: int) -> tuple[int, ...]:
        return self._opp_counts[i]

    def joint_actions(self):
        """Iterate joint pure actions in lexicographic order."""
        return itertools.product(*(range(k) for k in self.action_counts))

    def with_offset(self, i: int, c: float) -> "Game":
        u = self.utilities.copy()
        u[i] += c
        return Game(u, name=self.name)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "players": self.num_players,
            "actions": list(self.action_counts),
            "utilities": [self.utilities[i].reshape(-1).tolist() for i in range(self.num_players)],
        }

    @classmethod
    def from_dict(cls, doc: dict, name: str = "") -> "Game":
        try:
            n = int(doc["players"])
            counts = [int(k) for k in doc["actions"]]
            tables = doc["utilities"]
        except KeyError as exc:
            raise DimensionError(f"game document missing key {exc.args[0]!r}") from None
        if len(counts) != n or len(tables) != n:
            raise DimensionError(f"game document declares {n} players but lists {len(counts)} action counts and {len(tables)} tables")
        size = math.prod(counts)
        rows = []
        for i, t in enumerate(tables):
            t = np.asarray(t, dtype=float).reshape(-1)
            if t.size != size:
                raise DimensionError(f"utility table of player {i + 1} has {t.size} entries, expected {size}")
            rows.append(t.reshape(counts))
        return cls(np.stack(rows), name=doc.get("name", name))

    def save(self, path) -> None:
        doc = self.to_dict()
        if self.name:
            doc["name"] = self.name
        Path(path).write_text(json.dumps(doc, indent=2))


def load_game(ref) -> Game:
    """Resolve a preset name or a path to a JSON game document."""
    if isinstance(ref, Game):
        return ref
    if isinstance(ref, dict):
        return Game.from_dict(ref)
    ref = str(ref)
    if ref in GAME_PRESETS:
        return GAME_PRESETS[ref]()
    path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(f"no preset or game file named {ref!r}")
    return Game.from_dict(json.loads(path.read_text()), name=path.stem)


# --------------------------------------------------------------------------
# utilities and best responses
# --------------------------------------------------------------------------


def _check_profile(game: Game, x) -> None:
    if isinstance(x, np.ndarray):
        if x.shape != game.action_counts:
            raise DimensionError(f"correlated strategy has shape {x.shape}, game has {game.action_counts}")
        return
    if len(x) != game.num_players:
        raise DimensionError(f"product strategy has {len(x)} components, game has {game.num_players} players")
    for j, (m, k) in enumerate(zip(x, game.action_counts)):
        if np.shape(m) != (k,):
            raise DimensionError(f"marginal of player {j + 1} has shape {np.shape(m)}, expected ({k},)")


def expected_utility(game: Game, i: int, x: Strategy) -> float:
    """Expected payoff of player ``i`` under a joint strategy.

    The sum runs over joint actions in lexicographic order and is computed
    with ``math.fsum``, so the result is correctly rounded and reproducible.
    """
    _check_profile(game, x)
    dist = x if isinstance(x, np.ndarray) else joint_distribution(x)
    return math.fsum((game.utilities[i] * dist).reshape(-1).tolist())


def action_values(game: Game, i: int, opponents: Strategy) -> np.ndarray:
    """Vector of ``U_i(y_i, x_{-i})`` over player ``i``'s pure actions.

    ``opponents`` is either a sequence of the opponents' marginals (in player
    order, skipping ``i``) or an array over ``Y_{-i}``.
    """
    table = game._by_player[i]
    counts = game._opp_counts[i]
    if isinstance(opponents, np.ndarray):
        if opponents.shape != counts:
            raise DimensionError(f"opponent strategy for player {i + 1} has shape {opponents.shape}, expected {counts}")
        return table.reshape(table.shape[0], -1) @ opponents.reshape(-1)
    if len(opponents) != len(counts):
        raise DimensionError(f"player {i + 1} has {len(counts)} opponents, got {len(opponents)} marginals")
    v = table
    try:
        for m in reversed(opponents):
            v = v @ m
    except ValueError:
        raise DimensionError(f"opponent marginals for player {i + 1} do not match action counts {counts}") from None
    return v


def _argmax_set(values: np.ndarray, eps: float = 0.0) -> np.ndarray:
    return np.flatnonzero(values >= values.max() - eps - TIE_TOL)


def best_response_set(game: Game, i: int, x_minus_i: Strategy) -> frozenset[int]:
    """Pure best responses of player ``i`` (ties within ``TIE_TOL``)."""
    return frozenset(int(a) for a in _argmax_set(action_values(game, i, x_minus_i)))


def epsilon_best_response_set(game: Game, i: int, x_minus_i: Strategy, eps: float) -> frozenset[int]:
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    return frozenset(int(a) for a in _argmax_set(action_values(game, i, x_minus_i), eps))


def opponents_of(p: Product, i: int) -> Product:
    return tuple(p[:i]) + tuple(p[i + 1:])


@dataclass(frozen=True)
class EquilibriumReport:
    nash_gap: float
    per_player_regret: np.ndarray
    argmax_actions: tuple[frozenset, ...]


def nash_gap(game: Game, p: Product) -> EquilibriumReport:
    """Largest gain any player gets from a unilateral pure deviation."""
    if isinstance(p, np.ndarray):
        raise TypeError("nash_gap is defined on product strategies; got a correlated array")
    _check_profile(game, p)
    regrets = np.empty(game.num_players)
    argmax = []
    for i in range(game.num_players):
        v = action_values(game, i, opponents_of(p, i))
        regrets[i] = v.max() - float(v @ p[i])
        argmax.append(frozenset(int(a) for a in _argmax_set(v)))
    # clip negative round-off
    regrets = np.maximum(regrets, 0.0)
    return EquilibriumReport(float(regrets.max()), regrets, tuple(argmax))


def utility_range(game: Game, i: int) -> float:
    u = game.utilities[i]
    return float(u.max() - u.min())


# --------------------------------------------------------------------------
# built-in games
# --------------------------------------------------------------------------


def matching_pennies() -> Game:
    u1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return Game(np.stack([u1, -u1]), name="matching_pennies")


def coordination(num_players: int = 2, num_actions: int = 2) -> Game:
    """Identical-interest game: everyone gets 1 iff all actions agree."""
    shape = (num_actions,) * num_players
    u = np.zeros(shape)
    for a in range(num_actions):
        u[(a,) * num_players] = 1.0
    name = "coordination2" if (num_players, num_actions) == (2, 2) else f"coordination_{num_players}p{num_actions}a"
    return Game(np.stack([u] * num_players), name=name)


def shapley3() -> Game:
    """Shapley's 3x3 game; its unique equilibrium is uniform play and FP cycles around it."""
    u1 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    u2 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    return Game(np.stack([u1, u2]), name="shapley3")


DEFAULT_CONGESTION_COSTS = ((1.0, 0.0), (2.0, 0.0), (1.0, 1.5))


def congestion(num_players: int = 3, costs=DEFAULT_CONGESTION_COSTS) -> Game:
    """Symmetric congestion game with linear resource costs.

    Every player picks one resource ``r``; with ``k`` players on ``r`` each of
    them pays ``a_r * k + b_r`` where ``costs[r] = (a_r, b_r)``. Utilities are
    negated costs, so the game is anonymous and has Rosenthal's exact
    potential.
    """
    m = len(costs)
    shape = (m,) * num_players
    u = np.zeros((num_players,) + shape)
    for y in itertools.product(range(m), repeat=num_players):
        loads = np.bincount(y, minlength=m)
        for i, r in enumerate(y):
            a, b = costs[r]
            u[(i,) + y] = -(a * loads[r] + b)
    return Game(u, name=f"congestion_{num_players}p")


def random_game(shape: Sequence[int], rng: np.random.Generator, low: float = -1.0, high: float = 1.0) -> Game:
    shape = tuple(shape)
    return Game(rng.uniform(low, high, size=(len(shape),) + shape), name="random")


GAME_PRESETS = {
    "matching_pennies": matching_pennies,
    "coordination2": coordination,
    "shapley3": shapley3,
    "congestion_3p": lambda: congestion(3),
    "congestion_4p": lambda: congestion(4),
}
