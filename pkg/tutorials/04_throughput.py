"""
How fast does the simulator step, and how does throughput grow with batch size?

All environments in a batch advance one step per tick inside a compiled
loop, so per-tick overhead is paid once per batch.  The report printed at the
end also lists published reference numbers from other implementations as
context; they were measured on different hardware and are not targets.
"""
from qdmaze.bench import BenchConfig, bench_report, measure_throughput, scaling_sweep

r = measure_throughput(BenchConfig("pointmaze", batch_size=1000, policy="genotype",
                                   warmup_steps=20_000, measure_steps=200_000))
print("PointMaze with a 2x64 policy: %.3g +/- %.2g steps/s"
      % (r.steps_per_second_mean, r.steps_per_second_std))

sweep = scaling_sweep("pointmaze", [1, 10, 100, 1000], policy="random",
                      measure_seconds=0.2)
print(bench_report(sweep))
