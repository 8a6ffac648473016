"""Quality-diversity neuroevolution on deceptive maze worlds."""
__version__ = "0.1.0"

from .envs import AntMaze, AntTrap, PointMaze, batch_rollout, make_env, rollout
from .policy import Genotype, Topology, init_genotype
from .qd import GridArchive, QDConfig, qd_loop

__all__ = [
    "AntMaze", "AntTrap", "PointMaze", "Genotype", "GridArchive", "QDConfig",
    "Topology", "batch_rollout", "init_genotype", "make_env", "qd_loop", "rollout",
]
