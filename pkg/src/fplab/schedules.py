"""Step-size and best-response perturbation schedules.

Both are indexed by the iteration ``n >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class StepSizeSchedule:
    """Weights ``gamma(n)`` in (0, 1] used by the observation recursion.

    ``harmonic``: ``1/(n+1)``. ``power``: ``n**-a`` with ``0 < a <= 1``.
    ``custom``: an explicit table, ``table[n-1] == gamma(n)``.
    """

    kind: str = "harmonic"
    a: float = 1.0
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if not 0.0 < self.a <= 1.0:
                raise ConfigError(f"power step size needs 0 < a <= 1, got {self.a}", field="gamma.a")
        elif self.kind == "custom":
            t = np.asarray(self.table, dtype=float)
            if t.size == 0 or np.any(t <= 0) or np.any(t > 1):
                raise ConfigError("custom step sizes must lie in (0, 1]", field="gamma.table")
        elif self.kind != "harmonic":
            raise ConfigError(f"unknown step-size kind {self.kind!r}", field="gamma.kind")

    def __call__(self, n: int) -> float:
        if self.kind == "harmonic":
            return 1.0 / (n + 1)
        if self.kind == "power":
            return float(n) ** -self.a
        if n > len(self.table):
            raise ConfigError(f"custom step-size table has no entry for n={n}", field="gamma.table")
        return float(self.table[n - 1])

    def values(self, n_max: int) -> np.ndarray:
        """``[gamma(1), ..., gamma(n_max)]``."""
        n = np.arange(1, n_max + 1, dtype=float)
        if self.kind == "harmonic":
            return 1.0 / (n + 1.0)
        if self.kind == "power":
            return n ** -self.a
        if n_max > len(self.table):
            raise ConfigError(f"custom step-size table has {len(self.table)} entries, need {n_max}", field="gamma.table")
        return np.asarray(self.table[:n_max], dtype=float)

    @classmethod
    def from_config(cls, doc: dict | None) -> "StepSizeSchedule":
        doc = doc or {}
        return cls(kind=doc.get("kind", "harmonic"), a=float(doc.get("a", 1.0)), table=tuple(doc.get("table", ())))


@dataclass(frozen=True)
class PerturbationSchedule:
    """Best-response slack ``eps_n >= 0``.

    ``zero``: exact best responses. ``power``: ``c * n**-b`` with ``b > 0``.
    ``custom``: explicit table with ``table[n-1] == eps_n``; the last entry
    is held past the end of the table.
    """

    kind: str = "zero"
    c: float = 1.0
    b: float = 0.5
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if self.c < 0:
                raise ConfigError(f"perturbation scale must be nonnegative, got {self.c}", field="epsilon.c")
            if self.b <= 0:
                raise ConfigError(f"perturbation decay needs b > 0, got {self.b}", field="epsilon.b")
        elif self.kind == "custom":
            if np.any(np.asarray(self.table, dtype=float) < 0):
                raise ConfigError("custom perturbations must be nonnegative", field="epsilon.table")
        elif self.kind != "zero":
            raise ConfigError(f"unknown perturbation kind {self.kind!r}", field="epsilon.kind")

    def __call__(self, n: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "power":
            return self.c * float(n) ** -self.b
        if n > len(self.table):
            return float(self.table[-1]) if self.table else 0.0
        return float(self.table[n - 1])

    @classmethod
    def from_config(cls, doc: dict | None) -> "PerturbationSchedule":
        doc = doc or {}
        return cls(
            kind=doc.get("kind", "zero"),
            c=float(doc.get("c", 1.0)),
            b=float(doc.get("b", 0.5)),
            table=tuple(doc.get("table", ())),
        )


def constant_perturbation(eps: float) -> PerturbationSchedule:
    """Fixed slack; handy in tests, but it does not decay."""
    return PerturbationSchedule(kind="custom", table=(float(eps),))


def custom_steps(values: Sequence[float]) -> StepSizeSchedule:
    return StepSizeSchedule(kind="custom", table=tuple(float(v) for v in values))
