from .archive import Elite, GridArchive, GridSpec, Outcome, cell_index
from .emitters import (
    ESEmitter,
    GaussianEmitter,
    IsoLineEmitter,
    centered_ranks,
    es_step,
    es_update,
    gaussian_mutation,
    variation_isoline,
)
from .loop import QDConfig, RunResult, qd_loop
from .novelty import NoveltyArchive, novelty_score
