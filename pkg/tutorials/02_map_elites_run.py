"""
A short MAP-Elites run on PointMaze, compared across emitters.

Every emitter proposes a batch of policies, the batch is rolled out, and
each result competes only with the elite in its own descriptor cell (the
final (x, y) position on a 50 x 50 grid).  Coverage counts filled cells;
min_distance is how close the best-placed elite got to the exit.

Budgets here are small so the script finishes in about a minute.
"""
import numpy as np

from qdmaze import QDConfig, qd_loop

BUDGET = 300_000

for emitter in ("isoline", "es", "novelty"):
    cfg = QDConfig(world="pointmaze", emitter=emitter, budget=BUDGET, seed=0,
                   es_pop=64, es_sigma=0.05)
    res = qd_loop(cfg)
    m = res.final
    print(f"{emitter:8s} gens={m.generation:4d} coverage={m.coverage:.3f} "
          f"best_fitness={m.best_fitness:8.2f} min_distance={m.min_distance:.3f}")

# %% Look at the archive as an image-like array (NaN = empty cell)
grid = res.archive.fitness_grid()
filled = np.isfinite(grid)
print("filled cells per row band (bottom to top):",
      [int(filled[:, i:i + 10].sum()) for i in range(0, 50, 10)])
