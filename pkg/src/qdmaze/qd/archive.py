"""MAP-Elites grid archive."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..envs.core import Box
from ..policy import Genotype


@dataclass(frozen=True)
class GridSpec:
    descriptor_space: Box
    resolution: tuple[int, ...] = (50, 50)

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if len(res) != self.descriptor_space.ndim:
            raise ValueError("one resolution per descriptor axis is required")
        if any(r < 1 for r in res):
            raise ValueError(f"resolution must be >= 1 per axis, got {res}")
        object.__setattr__(self, "resolution", res)

    @property
    def n_cells(self) -> int:
        return math.prod(self.resolution)

    def flat(self, index: tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(index, self.resolution))

    def unflat(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.resolution))


def cell_index(descriptor, grid: GridSpec) -> tuple[int, ...]:
    """Uniform binning per axis; out-of-box descriptors land in the edge cell."""
    out = []
    for d, lo, hi, res in zip(descriptor, grid.descriptor_space.low,
                              grid.descriptor_space.high, grid.resolution):
        i = math.floor((float(d) - lo) * res / (hi - lo))
        out.append(min(max(i, 0), res - 1))
    return tuple(out)


class Outcome(enum.Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Elite:
    genotype: Genotype
    fitness: float
    descriptor: tuple[float, float]
    seed: int


class GridArchive:
    """At most one elite per cell; a candidate must strictly beat the incumbent."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self._elites: dict[int, Elite] = {}

    def __len__(self) -> int:
        return len(self._elites)

    def __contains__(self, index) -> bool:
        return self.grid.flat(index) in self._elites

    def __getitem__(self, index) -> Elite:
        return self._elites[self.grid.flat(index)]

    def get(self, index) -> Elite | None:
        return self._elites.get(self.grid.flat(index))

    def items(self):
        """(cell index, elite) pairs in flat-index order."""
        for k in sorted(self._elites):
            yield self.grid.unflat(k), self._elites[k]

    def elites(self) -> list[Elite]:
        return [e for _, e in self.items()]

    def insert(self, genotype: Genotype, fitness: float, descriptor, seed: int = 0) -> Outcome:
        fitness = float(fitness)
        if not math.isfinite(fitness):
            raise ValueError(f"fitness must be finite, got {fitness}")
        key = self.grid.flat(cell_index(descriptor, self.grid))
        current = self._elites.get(key)
        if current is not None and not fitness > current.fitness:
            return Outcome.REJECTED
        desc = (float(descriptor[0]), float(descriptor[1]))
        self._elites[key] = Elite(genotype, fitness, desc, int(seed))
        return Outcome.INSERTED if current is None else Outcome.REPLACED

    def select_uniform(self, rng: np.random.Generator, n: int) -> list[Genotype]:
        """``n`` parents drawn uniformly with replacement over filled cells."""
        if not self._elites:
            raise ValueError("cannot select from an empty archive")
        keys = sorted(self._elites)
        picks = rng.integers(len(keys), size=n)
        return [self._elites[keys[i]].genotype for i in picks]

    def fitness_grid(self) -> np.ndarray:
        """Fitness per cell; NaN for empty cells."""
        out = np.full(self.grid.n_cells, np.nan)
        for k, e in self._elites.items():
            out[k] = e.fitness
        return out.reshape(self.grid.resolution)

    def coverage(self) -> float:
        return len(self._elites) / self.grid.n_cells

    def best(self) -> Elite | None:
        if not self._elites:
            return None
        return max(self.elites(), key=lambda e: e.fitness)

    def qd_score(self, offset: float = 0.0, scale: float = 1.0) -> float:
        """Sum over filled cells of ``fitness * scale - offset``."""
        return float(sum(e.fitness * scale - offset for e in self.elites()))

    def min_distance(self, target) -> float:
        if not self._elites:
            return math.inf
        return min(
            math.hypot(e.descriptor[0] - target[0], e.descriptor[1] - target[1])
            for e in self._elites.values()
        )
