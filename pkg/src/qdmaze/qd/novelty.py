"""k-nearest-neighbour novelty over behavior descriptors."""
from __future__ import annotations

import math

import numpy as np


class NoveltyArchive:
    """Append-only store of descriptors."""

    def __init__(self, k: int = 10, dim: int = 2):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.dim = dim
        self._data = np.empty((0, dim))

    def __len__(self) -> int:
        return self._data.shape[0]

    @property
    def descriptors(self) -> np.ndarray:
        return self._data

    def add(self, descriptors) -> None:
        d = np.asarray(descriptors, dtype=np.float64).reshape(-1, self.dim)
        self._data = np.concatenate([self._data, d])

    def score(self, queries) -> np.ndarray:
        """Mean distance to the k nearest stored descriptors, per query.

        An empty archive scores every query ``inf``.
        """
        q = np.asarray(queries, dtype=np.float64).reshape(-1, self.dim)
        n = len(self)
        if n == 0:
            return np.full(q.shape[0], np.inf)
        k = min(self.k, n)
        dist = np.sqrt(((q[:, None, :] - self._data[None, :, :]) ** 2).sum(axis=2))
        nearest = np.partition(dist, k - 1, axis=1)[:, :k]
        return np.sort(nearest, axis=1).mean(axis=1)


def novelty_score(descriptor, archive: NoveltyArchive) -> float:
    if len(archive) == 0:
        return math.inf
    return float(archive.score([descriptor])[0])
