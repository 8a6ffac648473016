"""The QD optimisation loop and its metrics log."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..envs.core import EnvSpec, batch_rollout
from ..envs.worlds import WORLD_IDS, default_topology, goal_of, make_env
from ..policy import Topology
from ..rng import CounterStream, derive_key
from .archive import GridArchive, GridSpec
from .emitters import Emitter, ESEmitter, GaussianEmitter, IsoLineEmitter

EMITTER_IDS = ("isoline", "gaussian", "es", "novelty", "blend")

# (scale, offset) so that fitness * scale - offset >= 0 for every episode:
# PointMaze rewards >= -2*sqrt(2) over 200 steps; AntMaze per-step mean
# reward >= -75*sqrt(2) > -110; AntTrap rewards >= -1.4 + 1 over 1000 steps.
QD_SCORE_NORMALIZATION = {
    "pointmaze": (1.0, -200 * 2 * math.sqrt(2)),
    "antmaze": (1.0 / 3000, -110.0),
    "anttrap": (1.0, -400.0),
}

_GEN_STREAM = 0x6E6E
_EPISODE_STREAM = 0xE915


@dataclass(frozen=True)
class QDConfig:
    world: str = "pointmaze"
    emitter: str = "isoline"
    budget: int = 1_000_000
    batch_size: int = 256
    grid: tuple[int, int] = (50, 50)
    seed: int = 0
    obs_dim: int = 8
    hidden: tuple[int, ...] | None = None
    sigma_iso: float = 0.005
    sigma_line: float = 0.05
    sigma_gauss: float = 0.02
    es_pop: int = 256
    es_sigma: float = 0.02
    es_lr: float = 0.01
    novelty_k: int = 10
    novelty_weight: float = 0.5

    def __post_init__(self):
        if self.world not in WORLD_IDS:
            raise ValueError(f"world: unknown id {self.world!r}; choose from {WORLD_IDS}")
        if self.emitter not in EMITTER_IDS:
            raise ValueError(f"emitter: unknown id {self.emitter!r}; choose from {EMITTER_IDS}")
        if self.budget <= 0:
            raise ValueError("budget: must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def replace(self, **changes) -> "QDConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = list(self.grid)
        if self.hidden is not None:
            d["hidden"] = list(self.hidden)
        return d


def make_spec(config: QDConfig) -> EnvSpec:
    if config.world == "pointmaze":
        return make_env("pointmaze")
    return make_env(config.world, obs_dim=config.obs_dim)


def make_topology(config: QDConfig, spec: EnvSpec) -> Topology:
    if config.hidden is None:
        return default_topology(spec)
    return Topology(spec.obs_dim, config.hidden, spec.action_dim)


def make_emitter(config: QDConfig, topology: Topology) -> Emitter:
    if config.emitter == "isoline":
        return IsoLineEmitter(topology, config.seed, config.batch_size,
                              config.sigma_iso, config.sigma_line)
    if config.emitter == "gaussian":
        return GaussianEmitter(topology, config.seed, config.batch_size, config.sigma_gauss)
    mode = {"es": "fitness", "novelty": "novelty", "blend": "blend"}[config.emitter]
    return ESEmitter(topology, config.seed, mode, config.es_pop, config.es_sigma,
                     config.es_lr, config.novelty_k, config.novelty_weight)


@dataclass
class MetricsRow:
    generation: int
    env_steps: int
    evaluations: int
    coverage: float
    best_fitness: float
    qd_score: float
    min_distance: float
    wall_time_s: float = field(default=0.0, compare=False)


METRICS_COLUMNS = ("generation", "env_steps", "evaluations", "coverage",
                   "best_fitness", "qd_score", "min_distance", "wall_time_s")


@dataclass
class RunResult:
    config: QDConfig
    spec: EnvSpec
    archive: GridArchive
    metrics: list[MetricsRow]
    emitter: Emitter

    @property
    def final(self) -> MetricsRow:
        return self.metrics[-1]


def episode_seed(run_seed: int, generation: int, index: int) -> int:
    return derive_key(run_seed, _EPISODE_STREAM, generation, index) >> 1


def qd_loop(config: QDConfig, callback=None) -> RunResult:
    """Run select/vary -> evaluate -> insert until the step budget is spent.

    A generation is started only if it fits in the remaining budget even when
    every episode runs to ``max_steps``.  ``callback(row, archive)`` is
    invoked after each generation.
    """
    spec = make_spec(config)
    topology = make_topology(config, spec)
    emitter = make_emitter(config, topology)
    archive = GridArchive(GridSpec(spec.descriptor_space, config.grid))
    scale, offset = QD_SCORE_NORMALIZATION[spec.world.name]
    goal = goal_of(spec)
    worst_case = emitter.batch_size * spec.max_steps
    if config.budget < worst_case:
        raise ValueError(
            f"budget: {config.budget} env steps is less than one generation "
            f"({emitter.batch_size} episodes x {spec.max_steps} steps = {worst_case})"
        )
    root = CounterStream.from_seed(config.seed).split(_GEN_STREAM)
    metrics: list[MetricsRow] = []
    env_steps = 0
    evaluations = 0
    generation = 0
    t0 = time.perf_counter()
    while env_steps + worst_case <= config.budget:
        rng = root.split(generation).generator()
        candidates = emitter.ask(archive, rng)
        seeds = [episode_seed(config.seed, generation, i) for i in range(len(candidates))]
        summaries = batch_rollout(spec, candidates, seeds)
        for g, s, seed in zip(candidates, summaries, seeds):
            archive.insert(g, s.fitness, s.behavior_descriptor, seed)
        emitter.tell(candidates, summaries, archive)
        env_steps += sum(s.steps_taken for s in summaries)
        evaluations += len(summaries)
        generation += 1
        best = archive.best()
        row = MetricsRow(
            generation=generation,
            env_steps=env_steps,
            evaluations=evaluations,
            coverage=archive.coverage(),
            best_fitness=best.fitness if best else -math.inf,
            qd_score=archive.qd_score(offset, scale),
            min_distance=archive.min_distance(goal) if goal is not None else math.nan,
            wall_time_s=time.perf_counter() - t0,
        )
        metrics.append(row)
        if callback is not None:
            callback(row, archive)
    return RunResult(config, spec, archive, metrics, emitter)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(rows: list[MetricsRow], include_wall_time: bool = False,
                config_hash: str | None = None) -> str:
    """Metrics as CSV text; floats use their shortest round-trip repr.

    Wall-clock time is excluded unless requested, which keeps the file
    byte-identical across reruns of the same configuration.
    """
    cols = [c for c in METRICS_COLUMNS if include_wall_time or c != "wall_time_s"]
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_metrics_csv(rows, path, include_wall_time: bool = False,
                      config_hash: str | None = None) -> None:
    Path(path).write_text(metrics_csv(rows, include_wall_time, config_hash))


def read_metrics_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def median_final(results: list[RunResult], attr: str) -> float:
    return float(np.median([getattr(r.final, attr) for r in results]))
