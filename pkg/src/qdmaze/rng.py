"""Counter-based random streams.

Every random draw in the package is addressed by a key and a counter rather
than by the position of a shared sequential generator.  A key is a 64-bit
integer derived by hashing a tuple of integers (run seed, episode, step, ...),
so the same address always yields the same number no matter how work is
batched, scheduled or split across threads.

Two views of a stream exist:

* ``hash_uniform`` / ``_uniform_nb`` give one uniform number per
  ``(key, counter, lane)`` address.  The numba variant is what the stepping
  kernels use for random-action policies.
* ``CounterStream.generator()`` returns a numpy ``Generator`` backed by the
  Philox counter-based bit generator, keyed by the stream key, for bulk
  sampling in the variation operators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(*parts: int) -> int:
    """Fold integers into a single 64-bit stream key.

    Order matters: ``derive_key(1, 2) != derive_key(2, 1)``.  Negative parts are
    taken modulo 2**64.
    """
    k = GOLDEN
    for p in parts:
        k = mix64(k ^ mix64((int(p) + GOLDEN) & MASK64))
    return k


def hash_uniform(key: int, counter: int, lane: int = 0) -> float:
    """Uniform draw in [0, 1) addressed by (key, counter, lane)."""
    h = mix64(key ^ mix64((counter * GOLDEN + lane) & MASK64))
    return (h >> 11) * (1.0 / 9007199254740992.0)


# numba versions; uint64 arithmetic wraps modulo 2**64.
_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


@njit(cache=True)
def _mix64_nb(z):
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return z ^ (z >> _S31)


@njit(cache=True)
def _uniform_nb(key, counter, lane):
    c = np.uint64(counter) * _GOLDEN_U + np.uint64(lane)
    h = _mix64_nb(key ^ _mix64_nb(c))
    return np.float64(h >> _S11) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class CounterStream:
    """A keyed, splittable random stream."""

    key: int

    @classmethod
    def from_seed(cls, seed: int) -> "CounterStream":
        return cls(derive_key(seed))

    def split(self, *ids: int) -> "CounterStream":
        """Child stream; disjoint children for distinct ``ids``."""
        return CounterStream(derive_key(self.key, *ids))

    def uniform(self, counter: int, lane: int = 0) -> float:
        return hash_uniform(self.key, counter, lane)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))
