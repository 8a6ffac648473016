"""Archive snapshot files.

Layout (all integers and floats little-endian)::

    b"QDSNAP1\\n"
    header: one line of UTF-8 JSON, newline-terminated
    per elite, in flat cell order:
        <q cell> <d fitness> <d desc_x> <d desc_y> <Q seed> <I n> n genotype bytes
    32-byte SHA-256 of everything above

The header names the world, its observation size and layout, the grid, the
package version and the producing configuration's hash.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

from .. import __version__
from ..envs.core import Box, EnvSpec
from ..envs.worlds import layout_from_dict, layout_to_dict, make_env
from ..policy import from_bytes, to_bytes
from .archive import Elite, GridArchive, GridSpec

MAGIC = b"QDSNAP1\n"
_RECORD = struct.Struct("<qdddQI")


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    header: dict
    archive: GridArchive

    @property
    def world(self) -> str:
        return self.header["world"]

    def env_spec(self) -> EnvSpec:
        layout = layout_from_dict(self.header["layout"])
        if self.world == "pointmaze":
            return make_env("pointmaze", layout=layout)
        return make_env(self.world, obs_dim=self.header["obs_dim"], layout=layout)


def dumps(archive: GridArchive, spec: EnvSpec, config_hash: str = "") -> bytes:
    grid = archive.grid
    header = {
        "format": "qdmaze-snapshot",
        "version": 1,
        "code_version": __version__,
        "config_hash": config_hash,
        "world": spec.world.name,
        "obs_dim": spec.obs_dim,
        "layout": layout_to_dict(spec.world.layout),
        "grid": {
            "low": list(grid.descriptor_space.low),
            "high": list(grid.descriptor_space.high),
            "resolution": list(grid.resolution),
        },
        "n_elites": len(archive),
    }
    parts = [MAGIC, json.dumps(header, sort_keys=True).encode() + b"\n"]
    for index, e in archive.items():
        g = to_bytes(e.genotype)
        parts.append(_RECORD.pack(grid.flat(index), e.fitness, *e.descriptor, e.seed, len(g)))
        parts.append(g)
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> Snapshot:
    if not data.startswith(MAGIC):
        raise SnapshotError("not a snapshot file")
    body, digest = data[:-32], data[-32:]
    if len(data) < len(MAGIC) + 32 or hashlib.sha256(body).digest() != digest:
        raise SnapshotError("snapshot checksum mismatch; file is corrupted")
    nl = body.index(b"\n", len(MAGIC))
    header = json.loads(body[len(MAGIC):nl])
    g = header["grid"]
    grid = GridSpec(Box(tuple(g["low"]), tuple(g["high"])), tuple(g["resolution"]))
    archive = GridArchive(grid)
    pos = nl + 1
    for _ in range(header["n_elites"]):
        cell, fitness, dx, dy, seed, n = _RECORD.unpack_from(body, pos)
        pos += _RECORD.size
        genotype = from_bytes(body[pos:pos + n])
        pos += n
        archive._elites[cell] = Elite(genotype, fitness, (dx, dy), seed)
    if pos != len(body):
        raise SnapshotError("trailing bytes after the last elite record")
    return Snapshot(header, archive)


def save(path, archive: GridArchive, spec: EnvSpec, config_hash: str = "") -> None:
    Path(path).write_bytes(dumps(archive, spec, config_hash))


def load(path) -> Snapshot:
    return loads(Path(path).read_bytes())
