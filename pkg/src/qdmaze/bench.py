"""Throughput measurement for the batched stepping engine.

Throughput is counted in env-steps: one engine tick over a batch of ``B``
environments is ``B`` steps.  The timed code is the same per-step kernel
that ``batch_rollout`` (and therefore the QD loop) runs; ``BatchStepper``
only changes how often control returns to Python.
"""
from __future__ import annotations

import csv
import io
import math
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .envs.core import EnvSpec, TrajectorySummary
from .envs.worlds import WORLD_IDS, default_topology, make_env
from .policy import Genotype, init_genotype, stack_params
from .rng import derive_key

POLICIES = ("random", "genotype")

# Published single-CPU (first table) and GPU batch-scaling (second table)
# figures, in env-steps per second, as (mean, std).  Reported beside measured
# values for context only; different hardware and software stack.
REFERENCE_SINGLE_CPU = {
    "MuJoCo/NumPy": {"pointmaze": (9820, 180), "antmaze": (1170, 20), "anttrap": (1470, 50)},
    "Brax/Jax": {"pointmaze": (1.52e6, 0.13e6), "antmaze": (4480, 110), "anttrap": (7470, 180)},
}
REFERENCE_GPU_BATCH = {
    1: {"pointmaze": (21260, 1860), "antmaze": (345, 3), "anttrap": (356, 3)},
    10: {"pointmaze": (2.14e5, 0.22e5), "antmaze": (3290, 20), "anttrap": (3330, 30)},
    100: {"pointmaze": (2.14e6, 0.14e6), "antmaze": (31520, 90), "anttrap": (30840, 80)},
    1000: {"pointmaze": (2.03e7, 0.27e7), "antmaze": (1.77e5, 740), "anttrap": (2.3e5, 0.014e5)},
}

SWEEP_COLUMNS = ("world", "batch_size", "threads", "steps_per_second_mean",
                 "steps_per_second_std", "repeats")


@dataclass(frozen=True)
class BenchConfig:
    world: str = "pointmaze"
    batch_size: int = 100
    policy: str = "random"
    warmup_steps: int = 10_000
    measure_steps: int = 200_000
    repeats: int = 3
    threads: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.world not in WORLD_IDS:
            raise ValueError(f"world: unknown id {self.world!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy: expected one of {POLICIES}, got {self.policy!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.repeats < 2:
            raise ValueError("repeats: at least 2 are needed for a standard deviation")
        if self.measure_steps < 10 * self.batch_size:
            raise ValueError("measure_steps: must be at least 10 * batch_size")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps: must be >= 0")


@dataclass
class BenchResult:
    config: BenchConfig
    steps_per_second_mean: float
    steps_per_second_std: float
    raw: list[float]
    fingerprint: dict = field(default_factory=dict)


def available_threads() -> int:
    return numba.config.NUMBA_NUM_THREADS


def set_threads(threads: int | None) -> int:
    """Use ``threads`` worker threads (clamped to what numba was started with)."""
    n = available_threads() if threads is None else max(1, min(int(threads), available_threads()))
    numba.set_num_threads(n)
    return n


def _cpu_flags() -> list[str]:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("flags"):
                    flags = set(line.split(":", 1)[1].split())
                    return sorted(f for f in flags if f.startswith(("avx", "sse4", "fma")))
    except OSError:
        pass
    return []


def fingerprint(threads_requested: int | None = None) -> dict:
    return {
        "cpu_count": os.cpu_count(),
        "threads": numba.get_num_threads(),
        "threads_requested": threads_requested,
        "threads_available": available_threads(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "cpu_flags": _cpu_flags(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


class BatchStepper:
    """A batch of environments advanced one engine tick per ``tick()`` call.

    Each slot ``b`` runs the episode stream of ``seeds[b]``; with
    ``autoreset`` a finished slot restarts on the next tick with its episode
    counter incremented, otherwise it stays finished.
    """

    def __init__(self, spec: EnvSpec, seeds, genotypes: list[Genotype] | None = None,
                 autoreset: bool = True):
        self.spec = spec
        self.autoreset = autoreset
        n = len(seeds)
        self.random = genotypes is None
        if self.random:
            self.params2d = np.zeros((1, 1))
            self.gidx = np.zeros(n, dtype=np.int64)
            self.sizes = np.array([spec.obs_dim, spec.action_dim], dtype=np.int64)
        else:
            if len(genotypes) != n:
                raise ValueError(f"{len(genotypes)} genotypes but {n} seeds")
            self.params2d, self.gidx = stack_params(genotypes)
            self.sizes = genotypes[0].sizes
        self.keys = np.array([derive_key(s) for s in seeds], dtype=np.uint64)
        p = spec.packed
        self.pos = np.tile(np.asarray(p.start, dtype=np.float64), (n, 1))
        self.vel = np.zeros((n, 2))
        self.steps = np.zeros(n, dtype=np.int64)
        self.done = np.zeros(n, dtype=np.bool_)
        self.fitness = np.zeros(n)
        self.episodes = np.zeros(n, dtype=np.int64)

    @property
    def batch_size(self) -> int:
        return self.gidx.shape[0]

    def tick(self) -> None:
        p = self.spec.packed
        K.tick_nb(p.code, p.wp, p.walls, p.bounds, self.spec.max_steps,
                  p.start[0], p.start[1], self.params2d, self.gidx, self.sizes,
                  self.spec.obs_dim, self.spec.action_dim, self.keys, self.random,
                  self.autoreset, self.pos, self.vel, self.steps, self.done,
                  self.fitness, self.episodes)

    def run_to_completion(self) -> list[TrajectorySummary]:
        """Tick until every first episode ends (requires ``autoreset=False``)."""
        if self.autoreset:
            raise ValueError("run_to_completion needs autoreset=False")
        while not self.done.all():
            self.tick()
        wp = self.spec.packed.wp
        out = []
        for b in range(self.batch_size):
            bx, by = K.descriptor_nb(wp, self.pos[b, 0], self.pos[b, 1])
            early = bool(self.steps[b] < self.spec.max_steps)
            out.append(TrajectorySummary(float(self.fitness[b]), (float(bx), float(by)),
                                         int(self.steps[b]), early))
        return out


def _stepper(config: BenchConfig, spec: EnvSpec) -> BatchStepper:
    seeds = [config.seed * 1_000_003 + i for i in range(config.batch_size)]
    genotypes = None
    if config.policy == "genotype":
        g = init_genotype(default_topology(spec), config.seed)
        genotypes = [g] * config.batch_size
    return BatchStepper(spec, seeds, genotypes, autoreset=True)


def measure_throughput(config: BenchConfig) -> BenchResult:
    """Env-steps per second over ``repeats`` timed runs of ``measure_steps``.

    Warmup ticks (which also trigger compilation) are excluded from timing.
    """
    threads = set_threads(config.threads)
    spec = make_env(config.world)
    stepper = _stepper(config, spec)
    stepper.tick()
    for _ in range(math.ceil(config.warmup_steps / config.batch_size)):
        stepper.tick()
    ticks = math.ceil(config.measure_steps / config.batch_size)
    steps = ticks * config.batch_size
    raw = []
    for _ in range(config.repeats):
        t0 = time.perf_counter()
        for _ in range(ticks):
            stepper.tick()
        raw.append(steps / (time.perf_counter() - t0))
    fp = fingerprint(config.threads)
    fp["threads"] = threads
    return BenchResult(config, statistics.fmean(raw), statistics.stdev(raw), raw, fp)


def scaling_sweep(world: str, batch_sizes, *, policy: str = "random",
                  threads: int | None = None, measure_seconds: float = 0.5,
                  repeats: int = 3, seed: int = 0) -> list[BenchResult]:
    """One measurement per batch size, in ascending order.

    ``measure_steps`` per batch size is sized from a short probe so that each
    repeat lasts roughly ``measure_seconds``.
    """
    batch_sizes = list(batch_sizes)
    if batch_sizes != sorted(batch_sizes) or len(set(batch_sizes)) != len(batch_sizes):
        raise ValueError("batch_sizes must be strictly ascending")
    results = []
    for b in batch_sizes:
        probe = measure_throughput(BenchConfig(world, b, policy, warmup_steps=10 * b,
                                               measure_steps=10 * b, repeats=2,
                                               threads=threads, seed=seed))
        n = max(10 * b, int(probe.steps_per_second_mean * measure_seconds))
        results.append(measure_throughput(BenchConfig(world, b, policy, warmup_steps=n // 10,
                                                      measure_steps=n, repeats=repeats,
                                                      threads=threads, seed=seed)))
    return results


def sweep_csv(results: list[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in results:
        w.writerow([r.config.world, r.config.batch_size, r.fingerprint["threads"],
                    repr(r.steps_per_second_mean), repr(r.steps_per_second_std),
                    r.config.repeats])
    return buf.getvalue()


def bench_report(results: list[BenchResult]) -> str:
    """Plain-text report: measured values, fingerprint, published reference values."""
    lines = ["# qdmaze throughput report", "", "## Measured (env-steps/s, this machine)", ""]
    lines.append(f"{'world':<10} {'policy':<9} {'batch':>6} {'threads':>7} "
                 f"{'mean':>12} {'std':>10}")
    for r in results:
        c = r.config
        lines.append(f"{c.world:<10} {c.policy:<9} {c.batch_size:>6} {r.fingerprint['threads']:>7} "
                     f"{r.steps_per_second_mean:>12.4g} {r.steps_per_second_std:>10.3g}")
    if results:
        lines += ["", "## Fingerprint", ""]
        lines += [f"{k}: {v}" for k, v in results[0].fingerprint.items()]
    lines += ["", "## Reference: published single-CPU throughput (env-steps/s, mean +/- std)",
              "(context only, not a target; different hardware and simulator)", ""]
    lines.append(f"{'implementation':<14} {'pointmaze':>20} {'antmaze':>16} {'anttrap':>16}")
    for impl, row in REFERENCE_SINGLE_CPU.items():
        cells = [_pm(*row[w]) for w in WORLD_IDS]
        lines.append(f"{impl:<14} {cells[0]:>20} {cells[1]:>16} {cells[2]:>16}")
    lines += ["", "## Reference: published GPU batch scaling (env-steps/s, mean +/- std)",
              "(context only, single accelerator)", ""]
    lines.append(f"{'batch':<14} {'pointmaze':>20} {'antmaze':>16} {'anttrap':>16}")
    for b, row in REFERENCE_GPU_BATCH.items():
        cells = [_pm(*row[w]) for w in WORLD_IDS]
        lines.append(f"{b:<14} {cells[0]:>20} {cells[1]:>16} {cells[2]:>16}")
    return "\n".join(lines) + "\n"


def _pm(mean: float, std: float) -> str:
    return f"{mean:.4g} +/- {std:.3g}"


def result_dict(r: BenchResult) -> dict:
    d = asdict(r)
    d["config"] = asdict(r.config)
    return d
