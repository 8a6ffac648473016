import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdmaze.envs import TrajectorySummary
from qdmaze.policy import Genotype, Topology, init_genotype
from qdmaze.qd import (
    ESEmitter,
    GaussianEmitter,
    GridArchive,
    GridSpec,
    IsoLineEmitter,
    centered_ranks,
    es_step,
    es_update,
    gaussian_mutation,
    variation_isoline,
)
from qdmaze.envs import Box
from qdmaze.qd.emitters import es_noise, es_population

T = Topology(2, (3,), 2)


def sphere(xs):
    return [-float(np.dot(x, x)) for x in xs]


class TestIsoLine:
    def test_zero_sigmas(self):
        rng = np.random.default_rng(0)
        p1, p2 = init_genotype(T, 1), init_genotype(T, 2)
        assert variation_isoline(p1, p2, 0.0, 0.0, rng) == p1

    def test_equal_parents(self):
        p = init_genotype(T, 1)
        a = variation_isoline(p, p, 0.1, 5.0, np.random.default_rng(4))
        b = variation_isoline(p, p, 0.1, 0.0, np.random.default_rng(4))
        assert a == b

    def test_topology_mismatch(self):
        with pytest.raises(ValueError, match="topolog"):
            variation_isoline(init_genotype(T, 0), init_genotype(Topology(2, (4,), 2), 0),
                              0.1, 0.1, np.random.default_rng(0))

    def test_variance(self):
        t = Topology(1, (2,), 1)
        rng = np.random.default_rng(0)
        p1 = Genotype(t, rng.normal(size=t.parameter_count))
        p2 = Genotype(t, rng.normal(size=t.parameter_count))
        si, sl = 0.05, 0.3
        diffs = np.array([variation_isoline(p1, p2, si, sl, rng).params - p1.params
                          for _ in range(10_000)])
        expected = si ** 2 + sl ** 2 * (p2.params - p1.params) ** 2
        assert np.allclose(diffs.var(axis=0), expected, rtol=0.05)

    def test_gaussian(self):
        p = init_genotype(T, 0)
        rng = np.random.default_rng(0)
        d = np.array([gaussian_mutation(p, 0.2, rng).params - p.params for _ in range(4000)])
        assert d.std() == pytest.approx(0.2, rel=0.02)


class TestRanks:
    def test_range_and_ties(self):
        r = centered_ranks([3.0, 1.0, 2.0, 2.0])
        assert r.tolist() == [0.5, -0.5, 0.0, 0.0]

    def test_single(self):
        assert centered_ranks([5.0]).tolist() == [0.0]

    def test_nonfinite_is_minimum(self):
        r = centered_ranks([1.0, np.nan, 0.0, -np.inf])
        assert r[1] == -0.5 and r[3] == -0.5
        assert r[0] == 0.5

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50))
    def test_sum_zero(self, v):
        r = centered_ranks(v)
        assert abs(r.sum()) < 1e-9
        assert r.min() >= -0.5 and r.max() <= 0.5


class TestES:
    def test_even_population(self):
        with pytest.raises(ValueError, match="even"):
            es_noise(3, 7, np.random.default_rng(0))

    def test_mirrored_pairs(self):
        noise = es_noise(4, 6, np.random.default_rng(0))
        pop = es_population(np.zeros(4), noise, 0.5)
        for i in range(3):
            assert np.array_equal(pop[2 * i], -pop[2 * i + 1])

    def test_equal_fitness_no_move(self):
        c = np.array([0.3, -1.0, 2.0])
        out = es_step(c, 10, 0.1, 0.5, lambda xs: [1.0] * len(xs), np.random.default_rng(0))
        assert np.array_equal(out, c)

    def test_moves_toward_optimum_1d(self):
        c = np.array([1.0])
        out = es_step(c, 100, 0.1, 0.1, sphere, np.random.default_rng(0))
        assert 0.0 <= out[0] < 1.0

    @given(st.integers(0, 10**6), st.floats(-1e3, 1e3))
    def test_shift_invariance(self, seed, shift):
        rng = np.random.default_rng(seed)
        c = rng.normal(size=5)
        noise = es_noise(5, 20, rng)
        scores = np.array(sphere(es_population(c, noise, 0.1)))
        a = es_update(c, noise, scores, 0.1, 0.1)
        b = es_update(c, noise, scores + shift, 0.1, 0.1)
        # ranks are unchanged unless the shift merges distinct floats
        if np.array_equal(np.argsort(scores, kind="stable"),
                          np.argsort(scores + shift, kind="stable")) and \
                len(set(scores + shift)) == len(set(scores)):
            assert np.array_equal(a, b)

    def test_antithetic_symmetry(self):
        rng = np.random.default_rng(2)
        c = rng.normal(size=4)
        noise = es_noise(4, 10, rng)
        f = lambda eps: np.array(sphere(es_population(c, eps, 0.1)))
        a = es_update(c, noise, f(noise), 0.1, 0.1)
        b = es_update(c, -noise, f(-noise), 0.1, 0.1)
        assert np.allclose(a, b, rtol=0, atol=1e-15)

    def test_genotype_center(self):
        g = init_genotype(T, 0)
        out = es_step(g, 8, 0.05, 0.1, lambda xs: [float(x.params.sum()) for x in xs],
                      np.random.default_rng(0))
        assert isinstance(out, Genotype) and out.params.sum() > g.params.sum()

    def test_score_mismatch(self):
        noise = es_noise(2, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            es_update(np.zeros(2), noise, [1.0, 2.0], 0.1, 0.1)


def summaries(descs, fits):
    return [TrajectorySummary(f, d, 10, False) for d, f in zip(descs, fits)]


class TestEmitters:
    grid = GridSpec(Box((-1, -1), (1, 1)), (10, 10))

    def test_seeding_then_variation(self):
        e = IsoLineEmitter(T, seed=3, batch_size=6)
        a = GridArchive(self.grid)
        first = e.ask(a, np.random.default_rng(0))
        assert len(first) == 6 and len(set(first)) == 6
        for i, g in enumerate(first):
            a.insert(g, -i, (-0.9 + 0.3 * i, 0.0))
        nxt = e.ask(a, np.random.default_rng(1))
        assert len(nxt) == 6 and all(g.topology == T for g in nxt)

    def test_gaussian_emitter(self):
        e = GaussianEmitter(T, seed=0, batch_size=4, sigma=0.1)
        a = GridArchive(self.grid)
        a.insert(init_genotype(T, 9), -1, (0, 0))
        out = e.ask(a, np.random.default_rng(0))
        assert len(out) == 4 and all(g != init_genotype(T, 9) for g in out)

    def test_es_modes(self):
        for mode in ("fitness", "novelty", "blend"):
            e = ESEmitter(T, seed=0, mode=mode, pop_size=8)
            e.novelty.add([(0.0, 0.0)])
            pop = e.ask(None, np.random.default_rng(0))
            descs = [(0.1 * i, 0.0) for i in range(8)]
            e.tell(pop, summaries(descs, list(range(8))), None)
            assert len(e.novelty) == 9
            assert e.center != init_genotype(T, 0)

    def test_novelty_against_empty_archive_is_flat(self):
        # every offspring is infinitely novel, so ranks tie and nothing moves
        e = ESEmitter(T, seed=0, mode="novelty", pop_size=8)
        pop = e.ask(None, np.random.default_rng(0))
        e.tell(pop, summaries([(0.1 * i, 0.0) for i in range(8)], [0] * 8), None)
        assert e.center == init_genotype(T, 0)

    def test_novelty_scores(self):
        e = ESEmitter(T, seed=0, mode="novelty", pop_size=4, novelty_k=1)
        e.novelty.add([(0.0, 0.0)])
        s = e.scores(summaries([(3, 4), (0, 1), (0, 0), (6, 8)], [0, 0, 0, 0]))
        assert s.tolist() == [5.0, 1.0, 0.0, 10.0]

    def test_blend(self):
        e = ESEmitter(T, seed=0, mode="blend", pop_size=4, novelty_k=1, novelty_weight=0.5)
        e.novelty.add([(0.0, 0.0)])
        s = e.scores(summaries([(3, 4), (0, 1), (0, 0), (6, 8)], [3, 2, 1, 0]))
        nov = centered_ranks([5, 1, 0, 10])
        fit = centered_ranks([3, 2, 1, 0])
        assert np.array_equal(s, 0.5 * nov + 0.5 * fit)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ESEmitter(T, 0, mode="curiosity")
        with pytest.raises(ValueError):
            ESEmitter(T, 0, pop_size=5)
