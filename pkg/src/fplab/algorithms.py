"""FP-type algorithms: observation spaces, observation maps and forecasts.

An algorithm bundles a step-size schedule, an observation map ``g`` taking
joint strategies into a convex observation space ``Z``, and forecast maps
``f_i`` turning an observation state into a forecast of player ``i``'s
opponents. Observation states are flat float arrays; a space is a product of
simplices whose block sizes are recorded in :class:`ObservationSpace`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, PresetRefused, StateCorruptionError
from .equilibria import permutation_invariance_check
from .game import Game, Strategy, joint_distribution
from .schedules import StepSizeSchedule

MEMBERSHIP_TOL = 1e-7


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection of a 2-D array onto the simplex."""
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, v.shape[1] + 1)
    rho = np.count_nonzero(u - css / idx > 0, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


@dataclass(frozen=True)
class ObservationSpace:
    """A product of simplices, stored as one flat vector.

    ``kind`` is ``"profile"`` (one block per player, i.e. independent joint
    strategies), ``"joint"`` (one block over all joint actions) or
    ``"centroid"`` (one block over the common action set).
    """

    kind: str
    blocks: tuple[int, ...]
    labels: tuple[str, ...] = field(default=(), repr=False)
    _slices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = np.cumsum((0,) + tuple(self.blocks))
        object.__setattr__(self, "_slices", tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])))

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(s.start for s in self._slices)

    def block(self, k: int) -> slice:
        return self._slices[k]

    def split(self, z: np.ndarray) -> list[np.ndarray]:
        return [z[self.block(k)] for k in range(len(self.blocks))]

    def violation(self, z: np.ndarray) -> float:
        """Largest deviation from block-simplex membership."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            return np.inf
        worst = max(0.0, -float(z.min()))
        for b in self.split(z):
            worst = max(worst, abs(float(b.sum()) - 1.0))
        return worst

    def contains(self, z: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.violation(z) <= tol

    def check(self, z: np.ndarray, tol: float = MEMBERSHIP_TOL, what: str = "state") -> None:
        v = self.violation(z)
        if v > tol:
            raise StateCorruptionError(f"{what} left the observation space ({self.kind}); violation {v:.3g}")

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.concatenate([project_to_simplex(b) for b in self.split(np.asarray(z, dtype=float))])

    def project_rows(self, zs: np.ndarray) -> np.ndarray:
        """Block-wise projection of every row of ``zs``."""
        if len(set(self.blocks)) == 1:
            k = self.blocks[0]
            return project_rows_to_simplex(zs.reshape(-1, k)).reshape(zs.shape)
        out = np.empty_like(zs, dtype=float)
        for k in range(len(self.blocks)):
            blk = self.block(k)
            out[:, blk] = project_rows_to_simplex(zs[:, blk])
        return out

    def uniform_point(self) -> np.ndarray:
        return np.concatenate([np.full(k, 1.0 / k) for k in self.blocks])


@dataclass(frozen=True, eq=False)
class FPTypeAlgorithm:
    """Step sizes, observation map and forecast maps of an FP-type process.

    ``observe`` is ``g`` on mixed joint strategies; ``observe_pure`` is its
    restriction to pure joint actions (used on the hot path). Separable maps
    also supply ``contribution(j, a)``, the part of ``g`` owed to player ``j``
    playing ``a`` (so ``g(y) = sum_j contribution(j, y_j)``), and optionally
    ``own_block(j)``, the slice of ``Z`` that player ``j`` observes directly.
    """

    name: str
    action_counts: tuple[int, ...]
    space: ObservationSpace
    schedule: StepSizeSchedule
    observe: Callable[[Strategy], np.ndarray]
    forecast: Callable[[int, np.ndarray], Strategy]
    observe_pure: Optional[Callable[[Sequence[int]], np.ndarray]] = None
    contribution: Optional[Callable[[int, int], np.ndarray]] = None
    own_block: Optional[Callable[[int], slice]] = None
    validate: bool = False

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    @property
    def separable(self) -> bool:
        return self.contribution is not None

    def g(self, x: Strategy) -> np.ndarray:
        z = np.asarray(self.observe(x), dtype=float)
        if self.validate:
            self.space.check(z, what="observation map output")
        return z

    def g_pure(self, actions: Sequence[int]) -> np.ndarray:
        if self.observe_pure is not None:
            z = self.observe_pure(actions)
        else:
            z = self.observe(tuple(np.eye(k)[a] for a, k in zip(actions, self.action_counts)))
        if self.validate:
            self.space.check(z, what="observation map output")
        return z

    def f(self, i: int, z: np.ndarray) -> Strategy:
        out = self.forecast(i, z)
        if self.validate:
            _check_forecast(out, i)
        return out

    def with_schedule(self, schedule: StepSizeSchedule) -> "FPTypeAlgorithm":
        return replace(self, schedule=schedule)

    def with_validation(self, on: bool = True) -> "FPTypeAlgorithm":
        return replace(self, validate=on)

    def check_game(self, game: Game) -> None:
        if tuple(game.action_counts) != tuple(self.action_counts):
            raise DimensionError(f"algorithm built for action counts {self.action_counts}, game has {game.action_counts}")


def _check_forecast(out, i: int) -> None:
    parts = [out] if isinstance(out, np.ndarray) else list(out)
    for p in parts:
        p = np.asarray(p)
        if p.min() < -MEMBERSHIP_TOL or abs(p.sum() - 1.0) > MEMBERSHIP_TOL:
            raise StateCorruptionError(f"forecast for player {i + 1} is not a distribution")


def _marginals(x: Strategy, counts: tuple[int, ...]) -> list[np.ndarray]:
    if isinstance(x, np.ndarray):
        if x.shape != counts:
            raise DimensionError(f"joint strategy has shape {x.shape}, expected {counts}")
        n = len(counts)
        return [x.sum(axis=tuple(j for j in range(n) if j != i)) for i in range(n)]
    if len(x) != len(counts):
        raise DimensionError(f"product strategy has {len(x)} components, expected {len(counts)}")
    return [np.asarray(m, dtype=float) for m in x]


def _profile_labels(counts) -> tuple[str, ...]:
    return tuple(f"z_p{i + 1}_a{a + 1}" for i, k in enumerate(counts) for a in range(k))


def _profile_pieces(counts: tuple[int, ...]):
    space = ObservationSpace("profile", tuple(counts), _profile_labels(counts))
    offsets = space.offsets
    m = space.dim
    n = len(counts)

    def observe(x):
        return np.concatenate(_marginals(x, counts))

    def observe_pure(actions):
        z = np.zeros(m)
        for o, a in zip(offsets, actions):
            z[o + a] = 1.0
        return z

    def contribution(j, a):
        c = np.zeros(m)
        c[offsets[j] + a] = 1.0
        return c

    def own_block(j):
        return space.block(j)

    slices = [space.block(k) for k in range(n)]
    return space, observe, observe_pure, contribution, own_block, slices


def classical_fp(game: Game, schedule: StepSizeSchedule | None = None) -> FPTypeAlgorithm:
    """Classical FP: track every player's empirical marginal, forecast opponents by theirs."""
    counts = game.action_counts
    if game.num_players < 2:
        raise ConfigError("FP needs at least two players", field="game")
    space, observe, observe_pure, contribution, own_block, slices = _profile_pieces(counts)
    others = [[slices[j] for j in game.opponents(i)] for i in range(game.num_players)]

    def forecast(i, z):
        return tuple(z[s] for s in others[i])

    return FPTypeAlgorithm(
        name="fp",
        action_counts=counts,
        space=space,
        schedule=schedule or StepSizeSchedule("harmonic"),
        observe=observe,
        forecast=forecast,
        observe_pure=observe_pure,
        contribution=contribution,
        own_block=own_block,
    )


def jsfp(game: Game, schedule: StepSizeSchedule | None = None) -> FPTypeAlgorithm:
    """Joint-strategy FP: track the joint empirical distribution, forecast by marginalizing out the own action."""
    counts = game.action_counts
    if game.num_players < 2:
        raise ConfigError("FP needs at least two players", field="game")
    size = game.num_joint_actions
    labels = tuple("z_y" + "_".join(str(a + 1) for a in y) for y in itertools.product(*(range(k) for k in counts)))
    space = ObservationSpace("joint", (size,), labels)

    def observe(x):
        if isinstance(x, np.ndarray):
            if x.shape != counts:
                raise DimensionError(f"joint strategy has shape {x.shape}, expected {counts}")
            return x.reshape(-1).astype(float)
        return joint_distribution(_marginals(x, counts)).reshape(-1)

    def observe_pure(actions):
        z = np.zeros(size)
        z[np.ravel_multi_index(tuple(actions), counts)] = 1.0
        return z

    def forecast(i, z):
        return z.reshape(counts).sum(axis=i)

    return FPTypeAlgorithm(
        name="jsfp",
        action_counts=counts,
        space=space,
        schedule=schedule or StepSizeSchedule("harmonic"),
        observe=observe,
        forecast=forecast,
        observe_pure=observe_pure,
    )


def _require_ecfp_game(game: Game) -> None:
    check = permutation_invariance_check(game)
    if not check:
        raise PresetRefused(f"ECFP needs identical action sets and one permutation-invariant utility: {check.reason}")


def ecfp_centroid(game: Game, schedule: StepSizeSchedule | None = None) -> FPTypeAlgorithm:
    """Empirical centroid FP tracking only the average of all players' empirical marginals."""
    _require_ecfp_game(game)
    counts = game.action_counts
    n = game.num_players
    k = counts[0]
    space = ObservationSpace("centroid", (k,), tuple(f"z_a{a + 1}" for a in range(k)))

    def observe(x):
        return np.mean(np.stack(_marginals(x, counts)), axis=0)

    def observe_pure(actions):
        return np.bincount(np.asarray(actions), minlength=k).astype(float) / n

    def contribution(j, a):
        c = np.zeros(k)
        c[a] = 1.0 / n
        return c

    def forecast(i, z):
        return (z,) * (n - 1)

    return FPTypeAlgorithm(
        name="ecfp_centroid",
        action_counts=counts,
        space=space,
        schedule=schedule or StepSizeSchedule("harmonic"),
        observe=observe,
        forecast=forecast,
        observe_pure=observe_pure,
        contribution=contribution,
    )


def ecfp_profile(game: Game, schedule: StepSizeSchedule | None = None) -> FPTypeAlgorithm:
    """ECFP on the profile space: track marginals, forecast by copies of their centroid."""
    _require_ecfp_game(game)
    counts = game.action_counts
    n = game.num_players
    space, observe, observe_pure, contribution, own_block, slices = _profile_pieces(counts)

    def forecast(i, z):
        centroid = z.reshape(n, counts[0]).mean(axis=0)
        return (centroid,) * (n - 1)

    return FPTypeAlgorithm(
        name="ecfp_profile",
        action_counts=counts,
        space=space,
        schedule=schedule or StepSizeSchedule("harmonic"),
        observe=observe,
        forecast=forecast,
        observe_pure=observe_pure,
        contribution=contribution,
        own_block=own_block,
    )


ALGORITHMS = {
    "fp": classical_fp,
    "jsfp": jsfp,
    "ecfp_centroid": ecfp_centroid,
    "ecfp_profile": ecfp_profile,
}


def make_algorithm(name: str, game: Game, schedule: StepSizeSchedule | None = None) -> FPTypeAlgorithm:
    try:
        factory = ALGORITHMS[name]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}", field="algorithm") from None
    return factory(game, schedule)
