import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdmaze.envs import (
    Box,
    EnvSpec,
    EnvState,
    MazeLayout,
    batch_rollout,
    default_topology,
    make_env,
    observation,
    reset,
    rollout,
    step,
)
from qdmaze.policy import Genotype, Topology, init_genotype, zeros

WORLDS = ("pointmaze", "antmaze", "anttrap")


def open_pointmaze():
    base = make_env("pointmaze").world.layout
    return make_env("pointmaze", layout=MazeLayout(base.bounds, (), base.start,
                                                   base.goal, base.goal_radius))


def constant_action(spec, action):
    """Bias-only linear policy; tanh(20) == 1.0 exactly in float64."""
    t = Topology(spec.obs_dim, (), spec.action_dim)
    params = np.zeros(t.parameter_count)
    params[-spec.action_dim:] = [20.0 * np.sign(a) if abs(a) == 1 else np.arctanh(a)
                                 for a in action]
    return Genotype(t, params)


class TestSpec:
    def test_invariants(self, pm_spec):
        with pytest.raises(ValueError):
            EnvSpec(pm_spec.world, 0, 2, 200, pm_spec.descriptor_space)
        with pytest.raises(ValueError):
            Box((0, 0), (0, 1))
        with pytest.raises(ValueError):
            EnvSpec(pm_spec.world, 2, 2, 200, pm_spec.descriptor_space, "sometimes")

    def test_episode_caps(self, pm_spec, am_spec, at_spec):
        assert (pm_spec.max_steps, am_spec.max_steps, at_spec.max_steps) == (200, 3000, 1000)
        assert at_spec.early_termination == "none"

    def test_unknown_world(self):
        with pytest.raises(ValueError, match="unknown world"):
            make_env("humanoidtrap")


class TestResetStep:
    def test_reset_pointmaze(self, pm_spec):
        s = reset(pm_spec, 0)
        assert s.position == (0.75, -0.75) and s.step_index == 0 and not s.done
        assert reset(pm_spec, 7) == reset(pm_spec, 7)

    def test_reset_anttrap(self, at_spec):
        s = reset(at_spec, 123)
        assert s.position == (0.0, 0.0) and s.velocity == (0.0, 0.0)

    def test_zero_action(self, pm_spec):
        s0 = reset(pm_spec, 0)
        s1, tr = step(pm_spec, s0, [0.0, 0.0])
        assert s1.position == s0.position
        assert tr.reward == -math.hypot(1.5, 1.5)
        assert s1.step_index == 1

    def test_unit_action(self, pm_spec):
        s1, _ = step(pm_spec, reset(pm_spec, 0), [1.0, 1.0])
        assert s1.position == (0.75 + 0.1, -0.75 + 0.1)

    def test_action_clipped_in_transition(self, pm_spec):
        _, tr = step(pm_spec, reset(pm_spec, 0), [3.0, -0.5])
        assert tr.action.tolist() == [1.0, -0.5]

    def test_bad_actions(self, pm_spec):
        s = reset(pm_spec, 0)
        with pytest.raises(ValueError, match="expected 2"):
            step(pm_spec, s, [0.0])
        with pytest.raises(ValueError, match="finite"):
            step(pm_spec, s, [np.nan, 0.0])

    @given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-1, 1), st.floats(-1, 1))
    def test_goal_termination_rule(self, ox, oy, ax, ay):
        spec = make_env("pointmaze")
        gx, gy = -0.75, 0.75
        s = EnvState((gx + ox, gy + oy), (0.0, 0.0), 3, False, 0)
        s1, tr = step(spec, s, [ax, ay])
        d = math.hypot(s1.position[0] - gx, s1.position[1] - gy)
        assert s1.done == (d < 0.05)
        assert tr.done == s1.done

    def test_step_cap(self, pm_spec):
        s = EnvState((0.0, 0.0), (0.0, 0.0), 199, False, 0)
        s1, _ = step(pm_spec, s, [0.0, 0.0])
        assert s1.done and s1.step_index == 200

    @pytest.mark.parametrize("world", WORLDS)
    def test_done_is_absorbing(self, world):
        spec = make_env(world)
        s = EnvState((0.5, 0.5), (0.1, -0.1), spec.max_steps, True, 0)
        for a in (np.ones(spec.action_dim), -np.ones(spec.action_dim)):
            s1, tr = step(spec, s, a)
            assert s1 == s
            assert tr.reward == 0.0 and tr.absorbed and tr.done

    def test_ant_observation_layout(self, am_spec):
        s = EnvState((1.0, 2.0), (0.3, -0.1), 0, False, 0)
        assert observation(am_spec, s).tolist() == [1.0, 2.0, 0.3, -0.1, 28.0, -31.0, 0.0, 0.0]


class TestRollout:
    def test_zero_genotype_pointmaze(self, pm_spec):
        s = rollout(pm_spec, zeros(default_topology(pm_spec)), 0)
        assert s.behavior_descriptor == (0.75, -0.75)
        assert s.steps_taken == 200 and not s.terminated_early
        d = math.hypot(1.5, 1.5)
        assert s.fitness == pytest.approx(-200 * d, abs=1e-9)
        assert s.fitness == pytest.approx(-424.26406871192853, abs=1e-9)

    def test_early_exit(self):
        spec = open_pointmaze()
        s = rollout(spec, constant_action(spec, [-1.0, 1.0]), 0)
        assert s.steps_taken == 15 and s.terminated_early
        assert math.dist(s.behavior_descriptor, (-0.75, 0.75)) < 0.05

    @pytest.mark.parametrize("world", WORLDS)
    def test_trace_agrees_with_compiled(self, world):
        spec = make_env(world)
        g = init_genotype(default_topology(spec), 5)
        trace = []
        a = rollout(spec, g, 9, trace)
        b = rollout(spec, g, 9)
        assert a == b
        assert len(trace) == a.steps_taken <= spec.max_steps
        total = 0.0
        for tr in trace:
            total += tr.reward
            assert np.all(np.abs(tr.action) <= 1.0)
        assert total == a.fitness

    def test_anttrap_descriptor_inside_box(self, at_spec):
        g = constant_action(at_spec, [-1.0, 1.0] + [0.0] * 6)
        s = rollout(at_spec, g, 0)
        assert at_spec.descriptor_space.contains(s.behavior_descriptor)
        assert s.behavior_descriptor[0] == 0.0
        assert s.steps_taken == 1000

    def test_topology_mismatch(self, pm_spec):
        with pytest.raises(ValueError, match="needs 2 -> 2"):
            rollout(pm_spec, zeros(Topology(3, (4,), 2)), 0)


class TestBatchRollout:
    @pytest.mark.parametrize("world", WORLDS)
    def test_matches_sequential(self, world):
        spec = make_env(world)
        t = Topology(spec.obs_dim, (16, 16), spec.action_dim)
        gs = [init_genotype(t, i) for i in range(12)]
        seeds = [100 + i for i in range(12)]
        seq = [rollout(spec, g, s) for g, s in zip(gs, seeds)]
        assert batch_rollout(spec, gs, seeds) == seq
        assert batch_rollout(spec, gs[:1], seeds[:1]) == seq[:1]

    def test_permutation(self, pm_spec):
        t = default_topology(pm_spec)
        gs = [init_genotype(t, i) for i in range(30)]
        seeds = list(range(30))
        out = batch_rollout(pm_spec, gs, seeds)
        perm = np.random.default_rng(0).permutation(30)
        shuffled = batch_rollout(pm_spec, [gs[i] for i in perm], [seeds[i] for i in perm])
        assert shuffled == [out[i] for i in perm]

    def test_length_mismatch(self, pm_spec):
        with pytest.raises(ValueError, match="seeds"):
            batch_rollout(pm_spec, [zeros(default_topology(pm_spec))], [1, 2])

    def test_empty(self, pm_spec):
        assert batch_rollout(pm_spec, [], []) == []

    def test_random_actions_depend_on_seed_only(self, pm_spec):
        a = batch_rollout(pm_spec, [None] * 3, [1, 2, 3], random_actions=True)
        b = batch_rollout(pm_spec, [None] * 2, [3, 1], random_actions=True)
        assert b == [a[2], a[0]]
        assert a[0] != a[1]
