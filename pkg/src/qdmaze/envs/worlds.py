"""PointMaze, AntMaze and AntTrap: geometry, dynamics, rewards, descriptors.

PointMaze moves a point by ``0.1 * action`` per step.  The two ant worlds
replace rigid-body locomotion with a 2-D point mass under drag whose
acceleration is driven by the first two of eight action components; the
remaining components only enter the control cost.  Walls are segments
inflated into capsules of radius ``thickness / 2``; movement stops just
before the first contact, without sliding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .. import _kernels as K
from ..policy import Topology
from .core import Box, EnvSpec, EnvState

LAYOUT_FORMAT = "qdmaze-layout"
LAYOUT_VERSION = 1


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class WallSegment:
    a: tuple[float, float]
    b: tuple[float, float]
    thickness: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", (float(self.a[0]), float(self.a[1])))
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))
        if self.a == self.b:
            raise LayoutError(f"degenerate wall at {self.a}")
        if not self.thickness >= 0.0:
            raise LayoutError(f"wall thickness must be >= 0, got {self.thickness}")

    @property
    def radius(self) -> float:
        return 0.5 * self.thickness

    def row(self) -> list[float]:
        return [*self.a, *self.b, float(self.thickness)]


@dataclass(frozen=True)
class MazeLayout:
    bounds: Box
    walls: tuple[WallSegment, ...]
    start: tuple[float, float]
    goal: tuple[float, float]
    goal_radius: float

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        if not self.goal_radius > 0:
            raise LayoutError("goal_radius must be positive")


@dataclass(frozen=True)
class TrapLayout:
    bounds: Box
    walls: tuple[WallSegment, ...]
    start: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))


@dataclass(frozen=True)
class LocomotionParams:
    max_accel: float
    drag: float
    ctrl_cost_weight: float = 0.0
    survival_bonus: float = 0.0

    def __post_init__(self):
        vals = (self.max_accel, self.drag, self.ctrl_cost_weight, self.survival_bonus)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("locomotion parameters must be finite")
        if not 0.0 <= self.drag < 1.0:
            raise ValueError("drag must lie in [0, 1)")
        if self.ctrl_cost_weight < 0 or self.survival_bonus < 0:
            raise ValueError("cost weight and survival bonus must be >= 0")


def walls_array(walls) -> np.ndarray:
    if isinstance(walls, np.ndarray):
        arr = walls.astype(np.float64).reshape(-1, 5)
    else:
        arr = np.array([w.row() for w in walls], dtype=np.float64).reshape(-1, 5)
    return np.ascontiguousarray(arr)


def _bounds_array(bounds: Box | None) -> np.ndarray:
    if bounds is None:
        return np.array([-np.inf, -np.inf, np.inf, np.inf])
    return np.array([*bounds.low, *bounds.high], dtype=np.float64)


def _base_params(goal=None, goal_radius=0.0) -> np.ndarray:
    wp = np.zeros(K.WP_SIZE)
    if goal is not None:
        wp[K.WP_GOAL_X], wp[K.WP_GOAL_Y] = goal
        wp[K.WP_GOAL_RADIUS] = goal_radius
        wp[K.WP_HAS_GOAL] = 1.0
    wp[K.WP_EARLY_TERM] = 1.0
    return wp


# -- worlds -----------------------------------------------------------------

@dataclass(frozen=True)
class PointMaze:
    layout: MazeLayout
    step_size: float = 0.1
    name: str = field(default="pointmaze", init=False)

    def pack(self):
        wp = _base_params(self.layout.goal, self.layout.goal_radius)
        wp[K.WP_STEP_SIZE] = self.step_size
        return (K.POINTMAZE, wp, walls_array(self.layout.walls),
                _bounds_array(self.layout.bounds), self.layout.start)


@dataclass(frozen=True)
class AntMaze:
    layout: MazeLayout
    params: LocomotionParams
    name: str = field(default="antmaze", init=False)

    def pack(self):
        wp = _base_params(self.layout.goal, self.layout.goal_radius)
        _fill_locomotion(wp, self.params)
        return (K.ANTMAZE, wp, walls_array(self.layout.walls),
                _bounds_array(self.layout.bounds), self.layout.start)


@dataclass(frozen=True)
class AntTrap:
    layout: TrapLayout
    params: LocomotionParams
    descriptor_box: Box = Box((0.0, -8.0), (30.0, 8.0))
    name: str = field(default="anttrap", init=False)

    def pack(self):
        wp = _base_params()
        _fill_locomotion(wp, self.params)
        wp[K.WP_CLIP_DESC] = 1.0
        return (K.ANTTRAP, wp, walls_array(self.layout.walls),
                _bounds_array(self.layout.bounds), self.layout.start)


def _fill_locomotion(wp, params: LocomotionParams) -> None:
    wp[K.WP_MAX_ACCEL] = params.max_accel
    wp[K.WP_DRAG] = params.drag
    wp[K.WP_CTRL_COST] = params.ctrl_cost_weight
    wp[K.WP_SURVIVAL] = params.survival_bonus


ANTMAZE_LOCOMOTION = LocomotionParams(max_accel=0.02, drag=0.05)
ANTTRAP_LOCOMOTION = LocomotionParams(
    max_accel=0.05, drag=0.05, ctrl_cost_weight=0.05, survival_bonus=1.0
)

WORLD_IDS = ("pointmaze", "antmaze", "anttrap")


def pointmaze(layout: MazeLayout | None = None) -> EnvSpec:
    layout = layout or load_layout("pointmaze")
    return EnvSpec(
        world=PointMaze(layout), obs_dim=2, action_dim=2, max_steps=200,
        descriptor_space=Box((-1.0, -1.0), (1.0, 1.0)), early_termination="goal",
    )


def antmaze(obs_dim: int = 8, layout: MazeLayout | None = None,
            params: LocomotionParams = ANTMAZE_LOCOMOTION) -> EnvSpec:
    if obs_dim < 6:
        raise ValueError("ant observations need at least 6 entries")
    layout = layout or load_layout("antmaze")
    return EnvSpec(
        world=AntMaze(layout, params), obs_dim=obs_dim, action_dim=8, max_steps=3000,
        descriptor_space=Box((-35.0, -35.0), (40.0, 40.0)), early_termination="goal",
    )


def anttrap(obs_dim: int = 8, layout: TrapLayout | None = None,
            params: LocomotionParams = ANTTRAP_LOCOMOTION) -> EnvSpec:
    if obs_dim < 6:
        raise ValueError("ant observations need at least 6 entries")
    layout = layout or load_layout("anttrap")
    world = AntTrap(layout, params)
    return EnvSpec(
        world=world, obs_dim=obs_dim, action_dim=8, max_steps=1000,
        descriptor_space=world.descriptor_box, early_termination="none",
    )


def make_env(world_id: str, **kwargs) -> EnvSpec:
    factories = {"pointmaze": pointmaze, "antmaze": antmaze, "anttrap": anttrap}
    try:
        factory = factories[world_id]
    except KeyError:
        raise ValueError(f"unknown world {world_id!r}; choose from {WORLD_IDS}") from None
    return factory(**kwargs)


def default_topology(spec: EnvSpec) -> Topology:
    """Two hidden layers: 64 wide for PointMaze, 256 for the ant worlds."""
    width = 64 if spec.world.name == "pointmaze" else 256
    return Topology(spec.obs_dim, (width, width), spec.action_dim)


def goal_of(spec: EnvSpec) -> tuple[float, float] | None:
    layout = spec.world.layout
    return getattr(layout, "goal", None)


# -- standalone dynamics ----------------------------------------------------

def wall_clip(p, q, walls, bounds: Box | None = None) -> np.ndarray:
    """Endpoint of the move p -> q after wall contact and bounds clipping."""
    x, y, _ = K.wall_clip_nb(
        float(p[0]), float(p[1]), float(q[0]), float(q[1]),
        walls_array(walls), _bounds_array(bounds),
    )
    return np.array([x, y])


def pointmaze_dynamics(state: EnvState, action, layout: MazeLayout, step_size: float = 0.1
                       ) -> tuple[EnvState, float]:
    code, wp, walls, bounds, _ = PointMaze(layout, step_size).pack()
    act = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    px, py, _, _, reward, _ = K.env_step_nb(
        code, wp, walls, bounds, *state.position, 0.0, 0.0, act
    )
    return _advance(state, (px, py), (0.0, 0.0)), reward


def locomotion_dynamics(state: EnvState, action, params: LocomotionParams, walls,
                        bounds: Box | None = None) -> tuple[EnvState, np.ndarray]:
    wp = _base_params()
    _fill_locomotion(wp, params)
    act = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    px, py, vx, vy, _, _ = K.env_step_nb(
        K.ANTMAZE, wp, walls_array(walls), _bounds_array(bounds),
        *state.position, *state.velocity, act,
    )
    return _advance(state, (px, py), (vx, vy)), params.max_accel * act[:2]


def _advance(state: EnvState, position, velocity) -> EnvState:
    return EnvState(position, velocity, state.step_index + 1, state.done, state.rng_key)


def antmaze_reward(position, layout: MazeLayout) -> float:
    return -math.hypot(position[0] - layout.goal[0], position[1] - layout.goal[1])


def anttrap_reward(velocity, action, params: LocomotionParams) -> float:
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    return velocity[0] - params.ctrl_cost_weight * float(a @ a) + params.survival_bonus


def descriptor(world, state: EnvState) -> tuple[float, float]:
    if isinstance(world, AntTrap):
        return world.descriptor_box.clip(state.position)
    return tuple(state.position)


# -- layouts ----------------------------------------------------------------

def wall_clearance(points, walls) -> np.ndarray:
    """Distance from each point to the nearest capsule surface (< 0 inside)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    arr = walls_array(walls)
    if arr.shape[0] == 0:
        return np.full(pts.shape[0], np.inf)
    a = arr[None, :, 0:2]
    e = arr[None, :, 2:4] - a
    rel = pts[:, None, :] - a
    u = np.clip(np.sum(rel * e, axis=2) / np.sum(e * e, axis=2), 0.0, 1.0)
    closest = a + u[..., None] * e
    d = np.linalg.norm(pts[:, None, :] - closest, axis=2) - 0.5 * arr[None, :, 4]
    return d.min(axis=1)


def free_space_grid(bounds: Box, walls, resolution: float):
    """Boolean occupancy grid (True = free) with cell centers.

    A cell counts as blocked when any wall comes within half a cell diagonal
    of its center, so thin walls never leak between cells.
    """
    lo = np.array(bounds.low)
    hi = np.array(bounds.high)
    n = np.maximum(np.ceil((hi - lo) / resolution).astype(int), 1)
    xs = lo[0] + (np.arange(n[0]) + 0.5) * (hi[0] - lo[0]) / n[0]
    ys = lo[1] + (np.arange(n[1]) + 0.5) * (hi[1] - lo[1]) / n[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    half_diag = 0.5 * math.hypot((hi[0] - lo[0]) / n[0], (hi[1] - lo[1]) / n[1])
    clear = wall_clearance(np.stack([gx.ravel(), gy.ravel()], axis=1), walls)
    return (clear > half_diag).reshape(gx.shape), xs, ys


def _cell_of(point, xs, ys) -> tuple[int, int]:
    return int(np.abs(xs - point[0]).argmin()), int(np.abs(ys - point[1]).argmin())


def path_exists(layout: MazeLayout, resolution: float | None = None) -> bool:
    """Grid flood fill from start to goal; default cell = 1% of the diagonal."""
    b = layout.bounds
    if resolution is None:
        resolution = 0.01 * math.hypot(b.high[0] - b.low[0], b.high[1] - b.low[1])
    free, xs, ys = free_space_grid(b, layout.walls, resolution)
    labels, _ = ndimage.label(free)
    s = labels[_cell_of(layout.start, xs, ys)]
    g = labels[_cell_of(layout.goal, xs, ys)]
    return bool(s) and s == g


def ray_hits_wall(origin, direction, walls, length: float = 1e6) -> bool:
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64) * length
    arr = walls_array(walls)
    return any(
        K.capsule_entry(o[0], o[1], d[0], d[1], *row[:4], 0.5 * row[4]) <= 1.0
        for row in arr
    )


def validate_layout(layout: MazeLayout | TrapLayout) -> None:
    named = [("start", layout.start)]
    if isinstance(layout, MazeLayout):
        named.append(("goal", layout.goal))
    for label, pt in named:
        if not layout.bounds.contains(pt):
            raise LayoutError(f"{label} {pt} lies outside the bounds")
        if wall_clearance([pt], layout.walls)[0] <= 0.0:
            raise LayoutError(f"{label} {pt} lies inside a wall")
    if isinstance(layout, MazeLayout):
        if not path_exists(layout):
            raise LayoutError("no path connects start and goal")
    elif not ray_hits_wall(layout.start, (1.0, 0.0), layout.walls):
        raise LayoutError("trap does not block the +x ray from the start")


def layout_to_dict(layout: MazeLayout | TrapLayout) -> dict:
    trap = isinstance(layout, TrapLayout)
    return {
        "format": LAYOUT_FORMAT,
        "version": LAYOUT_VERSION,
        "kind": "trap" if trap else "maze",
        "bounds": [*layout.bounds.low, *layout.bounds.high],
        "walls": [w.row() for w in layout.walls],
        "start": list(layout.start),
        "goal": None if trap else list(layout.goal),
        "goal_radius": None if trap else layout.goal_radius,
    }


def layout_from_dict(data: dict) -> MazeLayout | TrapLayout:
    if data.get("format") != LAYOUT_FORMAT:
        raise LayoutError(f"not a layout file (format={data.get('format')!r})")
    if data.get("version") != LAYOUT_VERSION:
        raise LayoutError(f"unsupported layout version {data.get('version')!r}")
    try:
        b = data["bounds"]
        bounds = Box((b[0], b[1]), (b[2], b[3]))
        walls = tuple(WallSegment((w[0], w[1]), (w[2], w[3]), w[4]) for w in data["walls"])
        start = (float(data["start"][0]), float(data["start"][1]))
        if data.get("kind") == "trap":
            layout = TrapLayout(bounds, walls, start)
        else:
            goal = (float(data["goal"][0]), float(data["goal"][1]))
            layout = MazeLayout(bounds, walls, start, goal, float(data["goal_radius"]))
    except (KeyError, IndexError, TypeError) as exc:
        raise LayoutError(f"malformed layout: {exc}") from exc
    validate_layout(layout)
    return layout


def load_layout(name_or_path: str | Path) -> MazeLayout | TrapLayout:
    """Load a shipped layout by name (``"pointmaze"``) or any layout file."""
    path = Path(name_or_path)
    if path.suffix == ".layout" or path.exists():
        text = path.read_text()
    else:
        text = resources.files("qdmaze.envs.layouts").joinpath(f"{name_or_path}.layout").read_text()
    return layout_from_dict(json.loads(text))


def save_layout(layout: MazeLayout | TrapLayout, path: str | Path) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout), indent=2) + "\n")


def shipped_layouts() -> Sequence[str]:
    return WORLD_IDS
