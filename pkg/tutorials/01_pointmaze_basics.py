"""
PointMaze basics: stepping, rewards and the deceptive gradient.

The agent is a point in the square [-1, 1]^2.  Each step moves it by
0.1 * action (after clipping the action to [-1, 1]) unless a wall is in the
way, in which case it stops just short of the contact point.  The reward is
minus the distance to the exit, which is the trap: the straight line to the
exit runs into a wall.

Run with:  python3 tutorials/01_pointmaze_basics.py
"""
import numpy as np

from qdmaze import init_genotype, make_env, rollout
from qdmaze.envs import default_topology, reset, step

spec = make_env("pointmaze")
layout = spec.world.layout
print("start", layout.start, "exit", layout.goal, "radius", layout.goal_radius)

# %% A single step by hand
state = reset(spec, seed=0)
state, tr = step(spec, state, np.array([1.0, 1.0]))
print("after (1, 1):", state.position, "reward %.6f" % tr.reward)

# %% Follow the reward greedily and get stuck under the first wall
state = reset(spec, seed=0)
goal = np.array(layout.goal)
while not state.done:
    d = goal - np.array(state.position)
    state, tr = step(spec, state, d / np.abs(d).max())
print("greedy end point:", np.round(state.position, 3),
      "distance %.3f" % np.linalg.norm(goal - state.position))

# %% A random neural policy, with the full trace kept
topo = default_topology(spec)
print("policy:", topo.sizes, "->", topo.parameter_count, "parameters")
trace = []
summary = rollout(spec, init_genotype(topo, seed=3), seed=0, trace=trace)
xy = np.array([t.next_observation[:2] for t in trace])
print("fitness %.2f after %d steps, final descriptor %s"
      % (summary.fitness, summary.steps_taken, np.round(summary.behavior_descriptor, 3)))
print("visited x range [%.2f, %.2f], y range [%.2f, %.2f]"
      % (xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max()))
