from .core import (
    Box,
    EnvSpec,
    EnvState,
    TrajectorySummary,
    Transition,
    batch_rollout,
    observation,
    reset,
    rollout,
    state_descriptor,
    step,
)
from .worlds import (
    WORLD_IDS,
    AntMaze,
    AntTrap,
    LayoutError,
    LocomotionParams,
    MazeLayout,
    PointMaze,
    TrapLayout,
    WallSegment,
    antmaze,
    anttrap,
    default_topology,
    load_layout,
    make_env,
    pointmaze,
)
