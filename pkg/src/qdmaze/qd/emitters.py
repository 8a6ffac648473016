"""Variation operators and emitters.

Emitters follow an ask/tell protocol: ``ask`` proposes a generation of
genotypes, the loop evaluates them and inserts them into the archive, then
``tell`` hands back the trajectory summaries.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from ..envs.core import TrajectorySummary
from ..policy import Genotype, Topology, init_genotype
from .archive import GridArchive
from .novelty import NoveltyArchive


def variation_isoline(p1: Genotype, p2: Genotype, sigma_iso: float, sigma_line: float,
                      rng: np.random.Generator) -> Genotype:
    """Iso+line variation: ``p1 + sigma_iso*N(0, I) + sigma_line*N(0, 1)*(p2 - p1)``."""
    if p1.topology != p2.topology:
        raise ValueError("parents have different topologies")
    iso = rng.standard_normal(p1.params.size)
    line = rng.standard_normal()
    child = p1.params + sigma_iso * iso + sigma_line * line * (p2.params - p1.params)
    return Genotype(p1.topology, child)


def gaussian_mutation(parent: Genotype, sigma: float, rng: np.random.Generator) -> Genotype:
    noise = rng.standard_normal(parent.params.size)
    return Genotype(parent.topology, parent.params + sigma * noise)


def centered_ranks(values) -> np.ndarray:
    """Ranks mapped linearly onto [-0.5, 0.5]; ties share their mean rank.

    Non-finite values are pinned to the minimum, -0.5.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n == 1:
        return np.zeros(1)
    bad = ~np.isfinite(v)
    r = rankdata(np.where(bad, -np.inf, v), method="average") - 1.0
    out = r / (n - 1) - 0.5
    out[bad] = -0.5
    return out


def _vector(x) -> np.ndarray:
    return x.params if isinstance(x, Genotype) else np.asarray(x, dtype=np.float64)


def es_noise(dim: int, pop_size: int, rng: np.random.Generator) -> np.ndarray:
    """Half-population of standard normal directions, shape (pop_size/2, dim)."""
    if pop_size < 2 or pop_size % 2:
        raise ValueError(f"mirrored sampling needs an even population, got {pop_size}")
    return rng.standard_normal((pop_size // 2, dim))


def es_population(center, noise: np.ndarray, sigma: float) -> list:
    """Mirrored samples, interleaved as ``c + s*e_0, c - s*e_0, c + s*e_1, ...``."""
    c = _vector(center)
    out = []
    for e in noise:
        out.append(c + sigma * e)
        out.append(c - sigma * e)
    if isinstance(center, Genotype):
        return [Genotype(center.topology, x) for x in out]
    return out


def es_update(center, noise: np.ndarray, scores, sigma: float, lr: float):
    """``center + lr / (pop * sigma) * sum_i rank_i * eps_i`` with centered ranks."""
    ranks = centered_ranks(scores)
    pop = ranks.size
    if pop != 2 * noise.shape[0]:
        raise ValueError(f"{pop} scores for {2 * noise.shape[0]} samples")
    weights = ranks[0::2] - ranks[1::2]
    step = (lr / (pop * sigma)) * (weights @ noise)
    new = _vector(center) + step
    if isinstance(center, Genotype):
        return Genotype(center.topology, new)
    return new


def es_step(center, pop_size: int, sigma: float, lr: float,
            fitness_fn: Callable[[list], Sequence[float]], rng: np.random.Generator):
    """One OpenAI-ES update with mirrored sampling and rank normalisation."""
    noise = es_noise(_vector(center).size, pop_size, rng)
    samples = es_population(center, noise, sigma)
    scores = np.asarray(fitness_fn(samples), dtype=np.float64)
    return es_update(center, noise, scores, sigma, lr)


class Emitter:
    batch_size: int

    def ask(self, archive: GridArchive, rng: np.random.Generator) -> list[Genotype]:
        raise NotImplementedError

    def tell(self, genotypes: list[Genotype], summaries: list[TrajectorySummary],
             archive: GridArchive) -> None:
        pass


class _Seeding:
    """Fills an empty archive with freshly initialised genotypes."""

    def __init__(self, topology: Topology, seed: int):
        self.topology = topology
        self.seed = seed
        self._count = 0

    def fresh(self, n: int) -> list[Genotype]:
        out = [init_genotype(self.topology, self.seed * 1_000_003 + self._count + i)
               for i in range(n)]
        self._count += n
        return out


class IsoLineEmitter(Emitter, _Seeding):
    def __init__(self, topology: Topology, seed: int, batch_size: int = 256,
                 sigma_iso: float = 0.005, sigma_line: float = 0.05):
        _Seeding.__init__(self, topology, seed)
        self.batch_size = batch_size
        self.sigma_iso = sigma_iso
        self.sigma_line = sigma_line

    def ask(self, archive, rng):
        if len(archive) == 0:
            return self.fresh(self.batch_size)
        parents = archive.select_uniform(rng, 2 * self.batch_size)
        return [
            variation_isoline(parents[2 * i], parents[2 * i + 1],
                              self.sigma_iso, self.sigma_line, rng)
            for i in range(self.batch_size)
        ]


class GaussianEmitter(Emitter, _Seeding):
    def __init__(self, topology: Topology, seed: int, batch_size: int = 256,
                 sigma: float = 0.02):
        _Seeding.__init__(self, topology, seed)
        self.batch_size = batch_size
        self.sigma = sigma

    def ask(self, archive, rng):
        if len(archive) == 0:
            return self.fresh(self.batch_size)
        return [gaussian_mutation(p, self.sigma, rng)
                for p in archive.select_uniform(rng, self.batch_size)]


class ESEmitter(Emitter):
    """Evolution strategy whose score is fitness, novelty, or a blend of both.

    ``mode="fitness"`` climbs the episode return, ``"novelty"`` climbs the
    k-NN novelty of the final descriptor against every descriptor seen so
    far, ``"blend"`` averages the centered ranks of the two with weight
    ``novelty_weight`` on novelty.
    """

    MODES = ("fitness", "novelty", "blend")

    def __init__(self, topology: Topology, seed: int, mode: str = "fitness",
                 pop_size: int = 256, sigma: float = 0.02, lr: float = 0.01,
                 novelty_k: int = 10, novelty_weight: float = 0.5):
        if mode not in self.MODES:
            raise ValueError(f"unknown ES mode {mode!r}")
        if pop_size < 2 or pop_size % 2:
            raise ValueError("ES population must be even")
        self.mode = mode
        self.batch_size = pop_size
        self.sigma = sigma
        self.lr = lr
        self.novelty_weight = novelty_weight
        self.center = init_genotype(topology, seed)
        self.novelty = NoveltyArchive(k=novelty_k)
        self._noise: np.ndarray | None = None

    def ask(self, archive, rng):
        self._noise = es_noise(self.center.params.size, self.batch_size, rng)
        return es_population(self.center, self._noise, self.sigma)

    def scores(self, summaries: list[TrajectorySummary]) -> np.ndarray:
        fit = np.array([s.fitness for s in summaries])
        if self.mode == "fitness":
            return fit
        bds = np.array([s.behavior_descriptor for s in summaries])
        nov = self.novelty.score(bds)
        if self.mode == "novelty":
            return nov
        w = self.novelty_weight
        return w * centered_ranks(nov) + (1.0 - w) * centered_ranks(fit)

    def tell(self, genotypes, summaries, archive):
        scores = self.scores(summaries)
        self.center = es_update(self.center, self._noise, scores, self.sigma, self.lr)
        self.novelty.add([s.behavior_descriptor for s in summaries])
        self._noise = None
