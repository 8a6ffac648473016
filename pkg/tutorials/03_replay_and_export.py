"""
Saving an archive, reloading it, and replaying an elite bit for bit.

A snapshot stores each elite's genotype, the seed of its evaluation episode,
and its stored fitness/descriptor.  Because the simulator is deterministic
and the per-episode random stream is keyed by seed, replaying the elite must
reproduce the stored numbers exactly.
"""
import tempfile
from pathlib import Path

from qdmaze import QDConfig, qd_loop, rollout
from qdmaze.qd import snapshot

res = qd_loop(QDConfig(world="pointmaze", budget=100_000, batch_size=64, seed=1))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "archive.qdsnap"
    snapshot.save(path, res.archive, res.spec)
    print("snapshot size:", path.stat().st_size, "bytes,", len(res.archive), "elites")
    snap = snapshot.load(path)

spec = snap.env_spec()
elite = snap.archive.best()
again = rollout(spec, elite.genotype, elite.seed)
print("stored  ", elite.fitness, elite.descriptor)
print("replayed", again.fitness, again.behavior_descriptor)
print("bitwise equal:", (again.fitness, again.behavior_descriptor)
      == (elite.fitness, elite.descriptor))

# The same thing from the command line:
#   python3 -m qdmaze run src/qdmaze/configs/pointmaze_quickstart.json
#   python3 -m qdmaze replay runs/pointmaze_quickstart/seed_0/archive.qdsnap 25,25
#   python3 -m qdmaze export runs/pointmaze_quickstart/seed_0/archive.qdsnap -o heat.csv
