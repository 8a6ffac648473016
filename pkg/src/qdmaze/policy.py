"""MLP controllers stored as flat parameter vectors.

Parameter layout, stable across versions: for each layer from input to
output, the weight matrix of shape ``(n_in, n_out)`` in row-major order,
followed by its ``n_out`` biases.  A layer computes ``tanh(x @ W + b)``;
tanh is applied on hidden and output layers alike, so actions lie in
(-1, 1).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import forward_nb
from .rng import CounterStream

_INIT_STREAM = 0x1A17


@dataclass(frozen=True)
class Topology:
    obs_dim: int
    hidden: tuple[int, ...]
    action_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.obs_dim < 1 or self.action_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"layer widths must be positive: {self.sizes}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.obs_dim, *self.hidden, self.action_dim)

    @property
    def parameter_count(self) -> int:
        s = self.sizes
        return sum((s[i] + 1) * s[i + 1] for i in range(len(s) - 1))

    def layer_slices(self) -> list[tuple[slice, slice]]:
        """(weights, biases) slices of the flat vector, per layer."""
        out = []
        off = 0
        s = self.sizes
        for i in range(len(s) - 1):
            w = slice(off, off + s[i] * s[i + 1])
            off = w.stop
            b = slice(off, off + s[i + 1])
            off = b.stop
            out.append((w, b))
        return out


class Genotype:
    """Immutable parameter vector bound to a topology."""

    __slots__ = ("topology", "params", "_sizes")

    def __init__(self, topology: Topology, params):
        arr = np.array(params, dtype=np.float64, copy=True).reshape(-1)
        if arr.size != topology.parameter_count:
            raise ValueError(
                f"expected {topology.parameter_count} parameters, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("genotype parameters must be finite")
        arr.flags.writeable = False
        self.topology = topology
        self.params = arr
        self._sizes = np.asarray(topology.sizes, dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, Genotype):
            return NotImplemented
        return (
            self.topology == other.topology
            and self.params.tobytes() == other.params.tobytes()
        )

    def __hash__(self):
        return hash((self.topology, self.params.tobytes()))

    def __repr__(self):
        return f"Genotype({self.topology}, |params|={self.params.size})"

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes


def zeros(topology: Topology) -> Genotype:
    return Genotype(topology, np.zeros(topology.parameter_count))


def init_genotype(topology: Topology, seed: int) -> Genotype:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = CounterStream.from_seed(seed).split(_INIT_STREAM).generator()
    params = np.zeros(topology.parameter_count)
    for (w, _), n_in in zip(topology.layer_slices(), topology.sizes[:-1]):
        bound = 1.0 / np.sqrt(n_in)
        params[w] = rng.uniform(-bound, bound, size=w.stop - w.start)
    return Genotype(topology, params)


def forward(genotype: Genotype, observation) -> np.ndarray:
    obs = np.ascontiguousarray(observation, dtype=np.float64).reshape(-1)
    topo = genotype.topology
    if obs.size != topo.obs_dim:
        raise ValueError(f"observation has {obs.size} entries, expected {topo.obs_dim}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation must be finite")
    width = max(topo.sizes)
    out = np.empty(topo.action_dim)
    forward_nb(genotype.params, genotype.sizes, obs, out, np.empty(width), np.empty(width))
    return out


def encode(genotype: Genotype) -> np.ndarray:
    return genotype.params.copy()


def decode(topology: Topology, vector) -> Genotype:
    return Genotype(topology, vector)


def stack_params(genotypes: Sequence[Genotype]) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicate genotypes by identity into a parameter matrix.

    Returns ``(params2d, index)`` with ``params2d[index[i]]`` the parameters of
    ``genotypes[i]``.
    """
    rows: list[np.ndarray] = []
    seen: dict[int, int] = {}
    index = np.empty(len(genotypes), dtype=np.int64)
    for i, g in enumerate(genotypes):
        j = seen.get(id(g))
        if j is None:
            j = seen[id(g)] = len(rows)
            rows.append(g.params)
        index[i] = j
    if not rows:
        return np.zeros((0, 0)), index
    return np.ascontiguousarray(np.stack(rows)), index


# Serialized form: magic, layer count, layer widths, then float64 params,
# all little-endian.
_MAGIC = b"QDG1"


def to_bytes(genotype: Genotype) -> bytes:
    sizes = genotype.topology.sizes
    head = _MAGIC + struct.pack(f"<I{len(sizes)}I", len(sizes), *sizes)
    return head + genotype.params.astype("<f8").tobytes()


def from_bytes(data: bytes) -> Genotype:
    if data[:4] != _MAGIC:
        raise ValueError("not a serialized genotype")
    (n,) = struct.unpack_from("<I", data, 4)
    sizes = struct.unpack_from(f"<{n}I", data, 8)
    if n < 2:
        raise ValueError("topology needs at least input and output layers")
    topo = Topology(sizes[0], tuple(sizes[1:-1]), sizes[-1])
    start = 8 + 4 * n
    params = np.frombuffer(data, dtype="<f8", offset=start)
    if params.size != topo.parameter_count or len(data) != start + 8 * params.size:
        raise ValueError("genotype payload length does not match its topology")
    return Genotype(topo, params.astype(np.float64))
