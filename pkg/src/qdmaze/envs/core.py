"""Environment types and the deterministic rollout engine.

``reset``/``step`` are the single-environment reference path.  ``rollout``
(traced mode) is written directly on top of them; the untraced ``rollout``
and ``batch_rollout`` run the same per-step code inside compiled kernels and
agree with the reference path bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .. import _kernels as K
from ..policy import Genotype, forward, stack_params
from ..rng import derive_key

EARLY_TERMINATION_RULES = ("goal", "none")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box."""

    low: tuple[float, ...]
    high: tuple[float, ...]

    def __post_init__(self):
        low = tuple(float(v) for v in self.low)
        high = tuple(float(v) for v in self.high)
        if len(low) != len(high):
            raise ValueError("box bounds differ in dimension")
        if not all(lo < hi for lo, hi in zip(low, high)):
            raise ValueError(f"box needs low < high on every axis, got {low} / {high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def ndim(self) -> int:
        return len(self.low)

    def contains(self, x) -> bool:
        return all(lo <= v <= hi for v, lo, hi in zip(x, self.low, self.high))

    def clip(self, x) -> tuple[float, ...]:
        return tuple(min(max(float(v), lo), hi) for v, lo, hi in zip(x, self.low, self.high))


@dataclass(frozen=True)
class EnvSpec:
    """Static definition of one benchmark task."""

    world: object
    obs_dim: int
    action_dim: int
    max_steps: int
    descriptor_space: Box
    early_termination: str = "goal"
    name: str = ""

    def __post_init__(self):
        if min(self.obs_dim, self.action_dim, self.max_steps) <= 0:
            raise ValueError("obs_dim, action_dim and max_steps must be positive")
        if self.early_termination not in EARLY_TERMINATION_RULES:
            raise ValueError(f"unknown early termination rule {self.early_termination!r}")
        if self.descriptor_space.ndim != 2:
            raise ValueError("descriptor space must be two-dimensional")
        if not self.name:
            object.__setattr__(self, "name", self.world.name)

    @cached_property
    def packed(self) -> "_Packed":
        code, wp, walls, bounds, start = self.world.pack()
        wp = wp.copy()
        wp[K.WP_DESC_LO_X], wp[K.WP_DESC_LO_Y] = self.descriptor_space.low
        wp[K.WP_DESC_HI_X], wp[K.WP_DESC_HI_Y] = self.descriptor_space.high
        wp[K.WP_EARLY_TERM] = 1.0 if self.early_termination == "goal" else 0.0
        for arr in (wp, walls, bounds):
            arr.flags.writeable = False
        return _Packed(code, wp, walls, bounds, start)


@dataclass(frozen=True)
class _Packed:
    code: int
    wp: np.ndarray = field(repr=False)
    walls: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)
    start: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class EnvState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    step_index: int
    done: bool
    rng_key: int


@dataclass(frozen=True, eq=False)
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    state_descriptor: tuple[float, float]
    done: bool
    absorbed: bool = False


@dataclass(frozen=True)
class TrajectorySummary:
    fitness: float
    behavior_descriptor: tuple[float, float]
    steps_taken: int
    terminated_early: bool


def reset(spec: EnvSpec, seed: int) -> EnvState:
    sx, sy = spec.packed.start
    return EnvState((sx, sy), (0.0, 0.0), 0, False, derive_key(seed))


def observation(spec: EnvSpec, state: EnvState) -> np.ndarray:
    p = spec.packed
    out = np.zeros(spec.obs_dim)
    K.observe_nb(p.code, p.wp, *state.position, *state.velocity, out)
    return out


def state_descriptor(spec: EnvSpec, state: EnvState) -> tuple[float, float]:
    return K.descriptor_nb(spec.packed.wp, *state.position)


def step(spec: EnvSpec, state: EnvState, action) -> tuple[EnvState, Transition]:
    act = np.array(action, dtype=np.float64).reshape(-1)
    if act.size != spec.action_dim:
        raise ValueError(f"action has {act.size} entries, expected {spec.action_dim}")
    if not np.all(np.isfinite(act)):
        raise ValueError("action must be finite")
    np.clip(act, -1.0, 1.0, out=act)
    obs = observation(spec, state)
    if state.done:
        return state, Transition(
            obs, act, 0.0, obs, state_descriptor(spec, state), True, absorbed=True
        )
    p = spec.packed
    px, py, vx, vy, reward, reached = K.env_step_nb(
        p.code, p.wp, p.walls, p.bounds, *state.position, *state.velocity, act
    )
    n = state.step_index + 1
    new = EnvState((px, py), (vx, vy), n, bool(reached) or n >= spec.max_steps, state.rng_key)
    tr = Transition(
        obs, act, float(reward), observation(spec, new), state_descriptor(spec, new), new.done
    )
    return new, tr


def _check_topology(spec: EnvSpec, genotype: Genotype) -> None:
    t = genotype.topology
    if t.obs_dim != spec.obs_dim or t.action_dim != spec.action_dim:
        raise ValueError(
            f"genotype maps {t.obs_dim} -> {t.action_dim}, "
            f"environment {spec.name} needs {spec.obs_dim} -> {spec.action_dim}"
        )


def rollout(spec: EnvSpec, genotype: Genotype, seed: int, trace: list | None = None
            ) -> TrajectorySummary:
    """Run one episode with the policy encoded by ``genotype``.

    By default the episode runs in the compiled single-episode kernel.  When
    ``trace`` is a list the episode is instead driven step by step through
    ``reset``/``step``/``forward`` and every ``Transition`` is appended to it;
    both paths return identical summaries.
    """
    _check_topology(spec, genotype)
    if trace is None:
        p = spec.packed
        fit, bx, by, n, early = K.rollout_one_nb(
            p.code, p.wp, p.walls, p.bounds, spec.max_steps, p.start[0], p.start[1],
            genotype.params, genotype.sizes, spec.obs_dim, spec.action_dim,
            np.uint64(derive_key(seed)), False,
        )
        return TrajectorySummary(float(fit), (float(bx), float(by)), int(n), bool(early))
    state = reset(spec, seed)
    fitness = 0.0
    while not state.done:
        act = forward(genotype, observation(spec, state))
        state, tr = step(spec, state, act)
        fitness += tr.reward
        trace.append(tr)
    return TrajectorySummary(
        fitness,
        state_descriptor(spec, state),
        state.step_index,
        state.step_index < spec.max_steps,
    )


def batch_rollout(spec: EnvSpec, genotypes: Sequence[Genotype | None], seeds: Sequence[int],
                  *, random_actions: bool = False) -> list[TrajectorySummary]:
    """Evaluate many (genotype, seed) pairs; results in input order.

    With ``random_actions`` the genotypes are ignored and each episode draws
    uniform actions from the counter stream keyed by its seed.
    """
    seeds = list(seeds)
    if len(genotypes) != len(seeds):
        raise ValueError(f"{len(genotypes)} genotypes but {len(seeds)} seeds")
    n = len(seeds)
    if n == 0:
        return []
    p = spec.packed
    if random_actions:
        params2d = np.zeros((1, 1))
        gidx = np.zeros(n, dtype=np.int64)
        sizes = np.array([spec.obs_dim, spec.action_dim], dtype=np.int64)
    else:
        for g in genotypes:
            _check_topology(spec, g)
        params2d, gidx = stack_params(genotypes)
        sizes = genotypes[0].sizes
    keys = np.array([derive_key(s) for s in seeds], dtype=np.uint64)
    fit = np.empty(n)
    bd = np.empty((n, 2))
    steps = np.empty(n, dtype=np.int64)
    early = np.empty(n, dtype=np.bool_)
    K.rollout_batch_nb(
        p.code, p.wp, p.walls, p.bounds, spec.max_steps, p.start[0], p.start[1],
        params2d, gidx, sizes, spec.obs_dim, spec.action_dim, keys, random_actions,
        fit, bd, steps, early,
    )
    return [
        TrajectorySummary(float(fit[i]), (float(bd[i, 0]), float(bd[i, 1])),
                          int(steps[i]), bool(early[i]))
        for i in range(n)
    ]


def distance_to(point, target) -> float:
    return math.hypot(point[0] - target[0], point[1] - target[1])
