"""Command line entry point: ``qdmaze run|replay|bench|export``.

Output files go under the directory named by ``output_dir`` in the run
config, or under ``$QDMAZE_OUTPUT_ROOT`` when that variable is set.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import re
import sys
from pathlib import Path

from . import __version__

OUTPUT_ROOT_ENV = "QDMAZE_OUTPUT_ROOT"

RUN_KEYS = ("name", "world", "emitter", "budget", "batch_size", "grid", "seeds",
            "hyperparameters", "output_dir")
HYPERPARAMETERS = ("obs_dim", "hidden", "sigma_iso", "sigma_line", "sigma_gauss", "es_pop",
                   "es_sigma", "es_lr", "novelty_k", "novelty_weight")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    name: str
    world: str
    emitter: str
    budget: int
    batch_size: int
    grid: tuple[int, int]
    seeds: tuple[int, ...]
    hyperparameters: dict
    output_dir: str

    def canonical(self) -> dict:
        """Everything that determines results (the output location does not)."""
        return {
            "world": self.world, "emitter": self.emitter, "budget": self.budget,
            "batch_size": self.batch_size, "grid": list(self.grid),
            "hyperparameters": dict(sorted(self.hyperparameters.items())),
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def qd_config(self, seed: int):
        from .qd.loop import QDConfig
        return QDConfig(world=self.world, emitter=self.emitter, budget=self.budget,
                        batch_size=self.batch_size, grid=self.grid, seed=seed,
                        **self.hyperparameters)


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a JSON run config; errors carry ``source:line``."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be an object")

    def fail(key, msg):
        raise ConfigError(f"{source}:{_line_of(text, key)}: {key}: {msg}")

    for key in raw:
        if key not in RUN_KEYS:
            fail(key, f"unknown key (allowed: {', '.join(RUN_KEYS)})")
    hyper = raw.get("hyperparameters", {})
    if not isinstance(hyper, dict):
        fail("hyperparameters", "must be an object")
    for key in hyper:
        if key not in HYPERPARAMETERS:
            fail(key, f"unknown hyperparameter (allowed: {', '.join(HYPERPARAMETERS)})")
    for key in ("world", "emitter"):
        if key not in raw:
            raise ConfigError(f"{source}:1: {key}: required")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        fail("seeds", "must be a non-empty list of non-negative integers")
    if len(set(seeds)) != len(seeds):
        fail("seeds", "duplicate seed")
    for key in ("budget", "batch_size"):
        v = raw.get(key)
        if v is not None and (not isinstance(v, (int, float)) or v != int(v) or v <= 0):
            fail(key, "must be a positive integer")
    cfg = RunConfig(
        name=str(raw.get("name") or "run"),
        world=raw["world"],
        emitter=raw["emitter"],
        budget=int(raw.get("budget", 1_000_000)),
        batch_size=int(raw.get("batch_size", 256)),
        grid=tuple(raw.get("grid", (50, 50))),
        seeds=tuple(seeds),
        hyperparameters=dict(hyper),
        output_dir=str(raw.get("output_dir", "runs")),
    )
    # Delegate the remaining checks to the loop's own config type; its
    # messages start with the offending field name.
    try:
        cfg.qd_config(cfg.seeds[0])
    except (ValueError, TypeError) as e:
        field = str(e).split(":", 1)[0]
        key = field if field in raw or field in hyper else None
        if key is not None:
            fail(key, str(e).split(":", 1)[1].strip())
        raise ConfigError(f"{source}:1: {e}") from None
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read: {e.strerror}") from None
    return parse_run_config(text, str(path))


def output_root(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV) or cfg.output_dir)


def run_seed(cfg: RunConfig, seed: int, root: Path, log=print) -> Path:
    """Run one seed and write its artifacts; returns the seed directory."""
    from .qd import snapshot
    from .qd.loop import metrics_csv, qd_loop

    out = root / cfg.name / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash

    def progress(row, _archive):
        log(f"[{cfg.name} seed={seed}] gen {row.generation} steps {row.env_steps} "
            f"coverage {row.coverage:.3f} best {row.best_fitness:.4g}")

    result = qd_loop(cfg.qd_config(seed), callback=progress)
    (out / "metrics.csv").write_text(metrics_csv(result.metrics, config_hash=h))
    with open(out / "timing.csv", "w", newline="") as fh:
        fh.write(f"# config_hash: {h}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "wall_time_s"])
        for r in result.metrics:
            w.writerow([r.generation, repr(r.wall_time_s)])
    snapshot.save(out / "archive.qdsnap", result.archive, result.spec, h)
    manifest = {
        "config_hash": h,
        "code_version": __version__,
        "seed": seed,
        "seeds": list(cfg.seeds),
        "config": cfg.canonical(),
        "files": ["metrics.csv", "timing.csv", "archive.qdsnap"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    root = output_root(cfg)
    log = (lambda *a: None) if args.quiet else print
    for seed in cfg.seeds:
        out = run_seed(cfg, seed, root, log)
        print(f"wrote {out}")
    return 0


def parse_cell(text: str, grid) -> tuple[int, int]:
    """``"i,j"`` or a flat index."""
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise ValueError(f"cell must be 'i,j' or a flat index, got {text!r}") from None
    if len(nums) == 1:
        if not 0 <= nums[0] < grid.n_cells:
            raise ValueError(f"flat cell index {nums[0]} outside 0..{grid.n_cells - 1}")
        return grid.unflat(nums[0])
    if len(nums) != len(grid.resolution) or not all(
            0 <= n < r for n, r in zip(nums, grid.resolution)):
        raise ValueError(f"cell {tuple(nums)} outside grid {grid.resolution}")
    return tuple(nums)


def cmd_replay(args) -> int:
    from .envs.core import rollout
    from .qd import snapshot

    try:
        snap = snapshot.load(args.snapshot)
        cell = parse_cell(args.cell, snap.archive.grid)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    elite = snap.archive.get(cell)
    if elite is None:
        print(f"error: cell {cell} is empty", file=sys.stderr)
        return 2
    spec = snap.env_spec()
    trace = [] if args.trace else None
    s = rollout(spec, elite.genotype, elite.seed, trace)
    match = s.fitness == elite.fitness and s.behavior_descriptor == elite.descriptor
    print(f"cell {cell} seed {elite.seed}")
    print(f"fitness    replay {s.fitness!r} stored {elite.fitness!r}")
    print(f"descriptor replay {s.behavior_descriptor!r} stored {elite.descriptor!r}")
    print(f"steps {s.steps_taken} terminated_early {s.terminated_early}")
    print("match" if match else "MISMATCH")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            fh.write(f"# config_hash: {snap.header.get('config_hash', '')}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "x", "y", "reward", "descriptor_x", "descriptor_y"])
            for i, tr in enumerate(trace, 1):
                x, y = tr.next_observation[0], tr.next_observation[1]
                w.writerow([i, repr(float(x)), repr(float(y)), repr(tr.reward),
                            repr(tr.state_descriptor[0]), repr(tr.state_descriptor[1])])
        print(f"wrote {args.trace}")
    return 0 if match else 1


def _batch_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("batch sizes must be positive")
    if vals != sorted(set(vals)):
        raise argparse.ArgumentTypeError("batch sizes must be strictly ascending")
    return vals


def cmd_bench(args) -> int:
    from .bench import bench_report, scaling_sweep, sweep_csv

    results = scaling_sweep(args.world, args.batches, policy=args.policy,
                            threads=args.threads, measure_seconds=args.seconds,
                            repeats=args.repeats)
    out = Path(args.out or os.environ.get(OUTPUT_ROOT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(sweep_csv(results))
    report = bench_report(results)
    (out / "bench_report.txt").write_text(report)
    fp = dict(results[0].fingerprint)
    (out / "bench_fingerprint.json").write_text(json.dumps(fp, indent=2, sort_keys=True) + "\n")
    print(report, end="")
    print(f"wrote {out / 'bench.csv'} and {out / 'bench_report.txt'}")
    return 0


def heatmap_csv(snap) -> str:
    """One row per filled cell: cell_x, cell_y, fitness, descriptor_x, descriptor_y."""
    import io
    buf = io.StringIO()
    buf.write(f"# config_hash: {snap.header.get('config_hash', '')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell_x", "cell_y", "fitness", "descriptor_x", "descriptor_y"])
    for (i, j), e in snap.archive.items():
        w.writerow([i, j, repr(e.fitness), repr(e.descriptor[0]), repr(e.descriptor[1])])
    return buf.getvalue()


def cmd_export(args) -> int:
    from .qd import snapshot

    try:
        snap = snapshot.load(args.snapshot)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    text = heatmap_csv(snap)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdmaze", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qdmaze {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the QD loop for every seed of a JSON config")
    r.add_argument("config")
    r.add_argument("-q", "--quiet", action="store_true", help="no per-generation log")
    r.set_defaults(func=cmd_run)

    r = sub.add_parser("replay", help="re-simulate one archived elite")
    r.add_argument("snapshot")
    r.add_argument("cell", help="'i,j' or flat cell index")
    r.add_argument("--trace", metavar="CSV", help="write the per-step positions to CSV")
    r.set_defaults(func=cmd_replay)

    r = sub.add_parser("bench", help="throughput scaling sweep")
    r.add_argument("--world", default="pointmaze", choices=("pointmaze", "antmaze", "anttrap"))
    r.add_argument("--batches", type=_batch_list, default=[1, 10, 100, 1000])
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--policy", default="random", choices=("random", "genotype"))
    r.add_argument("--repeats", type=int, default=3)
    r.add_argument("--seconds", type=float, default=0.5, help="target duration per repeat")
    r.add_argument("--out", help="output directory (default: $QDMAZE_OUTPUT_ROOT or .)")
    r.set_defaults(func=cmd_bench)

    r = sub.add_parser("export", help="archive heatmap CSV")
    r.add_argument("snapshot")
    r.add_argument("-o", "--out", help="write to a file instead of stdout")
    r.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
