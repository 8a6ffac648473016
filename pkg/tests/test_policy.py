import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qdmaze.policy import (
    Genotype,
    Topology,
    decode,
    encode,
    forward,
    from_bytes,
    init_genotype,
    stack_params,
    to_bytes,
    zeros,
)

small_topologies = st.builds(
    Topology,
    st.integers(1, 6),
    st.lists(st.integers(1, 9), min_size=0, max_size=3).map(tuple),
    st.integers(1, 5),
)


class TestTopology:
    def test_pointmaze_count(self):
        t = Topology(2, (64, 64), 2)
        assert t.parameter_count == oracles.parameter_count(t.sizes) == 4482

    def test_antmaze_count(self):
        t = Topology(8, (256, 256), 8)
        assert t.parameter_count == oracles.parameter_count(t.sizes) == 70152

    def test_antmaze_count_two_inputs(self):
        assert Topology(2, (256, 256), 8).parameter_count == 68616

    @given(small_topologies)
    def test_slices_tile_the_vector(self, t):
        flat = []
        for w, b in t.layer_slices():
            flat += list(range(w.start, w.stop)) + list(range(b.start, b.stop))
        assert flat == list(range(t.parameter_count))

    def test_rejects_empty_layer(self):
        with pytest.raises(ValueError):
            Topology(2, (0,), 2)


class TestGenotype:
    def test_length_checked(self):
        with pytest.raises(ValueError, match="expected 9"):
            Genotype(Topology(2, (), 3), np.zeros(8))

    def test_nan_rejected(self):
        t = Topology(2, (3,), 1)
        v = np.zeros(t.parameter_count)
        v[4] = np.nan
        with pytest.raises(ValueError, match="finite"):
            decode(t, v)

    def test_immutable(self):
        g = zeros(Topology(2, (3,), 1))
        with pytest.raises(ValueError):
            g.params[0] = 1.0

    def test_copy_on_construction(self):
        t = Topology(1, (), 1)
        v = np.array([1.0, 2.0])
        g = Genotype(t, v)
        v[0] = 5.0
        assert g.params[0] == 1.0

    def test_init_deterministic_and_bounded(self):
        t = Topology(8, (32, 16), 4)
        a, b = init_genotype(t, 3), init_genotype(t, 3)
        assert a == b and hash(a) == hash(b)
        assert a != init_genotype(t, 4)
        for (w, bias), n_in in zip(t.layer_slices(), t.sizes[:-1]):
            assert np.all(np.abs(a.params[w]) <= 1 / math.sqrt(n_in))
            assert np.all(a.params[bias] == 0.0)

    def test_init_spread(self):
        t = Topology(100, (400,), 1)
        w = init_genotype(t, 0).params[t.layer_slices()[0][0]]
        # uniform(-0.1, 0.1) has variance 0.01 / 3
        assert w.var() == pytest.approx(0.01 / 3, rel=0.03)


class TestForward:
    def test_zero_genotype(self):
        g = zeros(Topology(3, (5, 5), 2))
        assert np.array_equal(forward(g, [0.3, -2.0, 7.0]), [0.0, 0.0])

    def test_hand_computed_single_unit(self):
        # 1 -> 1 hidden unit -> 1: tanh(w2 * tanh(w1 * x + b1) + b2)
        g = Genotype(Topology(1, (1,), 1), [0.7, -0.2, 1.3, 0.05])
        expected = math.tanh(1.3 * math.tanh(0.7 * 0.4 - 0.2) + 0.05)
        assert forward(g, [0.4])[0] == pytest.approx(expected, abs=1e-12)

    @given(small_topologies, st.integers(0, 10**6))
    def test_matches_reference_loop(self, t, seed):
        rng = np.random.default_rng(seed)
        g = Genotype(t, rng.normal(size=t.parameter_count))
        x = rng.normal(size=t.obs_dim)
        ref = oracles.mlp_forward(t.sizes, g.params, x)
        assert np.allclose(forward(g, x), ref, atol=1e-12, rtol=0)

    @given(st.integers(0, 10**6))
    def test_output_bounds(self, seed):
        rng = np.random.default_rng(seed)
        t = Topology(4, (16, 16), 3)
        g = Genotype(t, rng.uniform(-0.5, 0.5, t.parameter_count))
        y = forward(g, rng.uniform(-1, 1, 4))
        assert np.all(np.abs(y) < 1.0)
        # large pre-activations saturate to the closed interval in float64
        big = Genotype(t, 100 * g.params)
        assert np.all(np.abs(forward(big, rng.uniform(-1, 1, 4))) <= 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="expected 3"):
            forward(zeros(Topology(3, (2,), 1)), [1.0, 2.0])

    def test_deterministic(self):
        t = Topology(8, (256, 256), 8)
        g = init_genotype(t, 1)
        x = np.linspace(-1, 1, 8)
        assert forward(g, x).tobytes() == forward(g, x).tobytes()

    def test_continuity(self):
        t = Topology(4, (32, 32), 2)
        g = init_genotype(t, 2)
        x = np.array([0.1, -0.4, 0.3, 0.9])
        y = forward(g, x)
        rng = np.random.default_rng(0)
        d = rng.standard_normal(t.parameter_count)
        gaps = [np.abs(forward(Genotype(t, g.params + eps * d), x) - y).max()
                for eps in (1e-2, 1e-4, 1e-6, 1e-8)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-6


class TestCodec:
    @given(small_topologies, st.integers(0, 10**6))
    def test_round_trip(self, t, seed):
        g = Genotype(t, np.random.default_rng(seed).normal(size=t.parameter_count))
        assert decode(t, encode(g)) == g
        assert from_bytes(to_bytes(g)) == g

    def test_zero_encodes_to_zeros(self):
        t = Topology(2, (4,), 2)
        assert np.array_equal(encode(zeros(t)), np.zeros(t.parameter_count))

    def test_byte_layout(self):
        g = Genotype(Topology(1, (), 1), [1.5, -2.0])
        b = to_bytes(g)
        assert b[:4] == b"QDG1"
        assert b[4:16] == (2).to_bytes(4, "little") + (1).to_bytes(4, "little") * 2
        assert np.frombuffer(b[16:], "<f8").tolist() == [1.5, -2.0]

    def test_truncated_payload(self):
        b = to_bytes(zeros(Topology(2, (3,), 1)))
        with pytest.raises(ValueError):
            from_bytes(b[:-8])
        with pytest.raises(ValueError):
            from_bytes(b"XXXX" + b[4:])


class TestStack:
    def test_dedup_by_identity(self):
        t = Topology(1, (), 1)
        a, b = Genotype(t, [1, 2]), Genotype(t, [3, 4])
        p, idx = stack_params([a, b, a, a])
        assert p.shape == (2, 2)
        assert idx.tolist() == [0, 1, 0, 0]
