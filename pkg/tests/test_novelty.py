import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qdmaze.qd import NoveltyArchive, novelty_score

pt = st.tuples(st.floats(-50, 50), st.floats(-50, 50))


class TestNovelty:
    def test_examples(self):
        a = NoveltyArchive(k=1)
        a.add([(0.0, 0.0)])
        assert novelty_score((3.0, 4.0), a) == 5.0
        assert novelty_score((0.0, 0.0), a) == 0.0

    def test_k3(self):
        a = NoveltyArchive(k=3)
        a.add([(0, 0), (1, 0), (0, 1), (10, 10)])
        assert novelty_score((0, 0), a) == pytest.approx(2 / 3, abs=1e-15)

    def test_empty_is_infinite(self):
        assert novelty_score((1, 1), NoveltyArchive()) == math.inf
        assert np.all(np.isinf(NoveltyArchive().score(np.zeros((3, 2)))))

    def test_k_capped_by_size(self):
        a = NoveltyArchive(k=10)
        a.add([(0, 0), (0, 2)])
        assert novelty_score((0, 1), a) == 1.0

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            NoveltyArchive(k=0)

    @given(st.lists(pt, min_size=1, max_size=40), st.lists(pt, min_size=1, max_size=5),
           st.integers(1, 12))
    def test_matches_brute_force(self, stored, queries, k):
        a = NoveltyArchive(k=k)
        a.add(stored)
        got = a.score(queries)
        for q, g in zip(queries, got):
            assert g == pytest.approx(oracles.knn_mean(q, stored, k), rel=1e-12, abs=1e-12)

    def test_append_only(self):
        a = NoveltyArchive()
        a.add([(1, 2)])
        a.add(np.array([[3, 4], [5, 6]]))
        assert len(a) == 3
        assert a.descriptors.tolist() == [[1, 2], [3, 4], [5, 6]]
