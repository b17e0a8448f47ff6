import hypothesis
import numpy as np
import pytest

from mosaicopt.problem import MosaicProblem
from mosaicopt.tiledb import TileDatabase

hypothesis.settings.register_profile("ci", deadline=None, max_examples=50)
hypothesis.settings.load_profile("ci")


def make_db(n_tiles, tile_size=(2, 2), seed=0, bins=4, quantized=True):
    """Random synthetic tile database; quantized pixels sit on the 8-bit grid."""
    rng = np.random.default_rng(seed)
    rows, cols = tile_size
    if quantized:
        stack = rng.integers(0, 256, size=(n_tiles, rows, cols, 3)) / 255.0
    else:
        stack = rng.random((n_tiles, rows, cols, 3))
    paths = [f"mem://tile/{i}" for i in range(n_tiles)]
    return TileDatabase(tile_size, stack, paths, bins)


def make_problem(n_rows=3, n_cols=3, n_tiles=12, n_redu=2, tile_size=(2, 2), seed=0):
    """Random mosaic instance with independent target blocks."""
    rng = np.random.default_rng(seed + 1_000_000)
    db = make_db(n_tiles, tile_size=tile_size, seed=seed)
    rows, cols = tile_size
    blocks = rng.integers(0, 256, size=(n_rows * n_cols, rows, cols, 3)) / 255.0
    return MosaicProblem(db, blocks, n_rows, n_cols, n_redu)


@pytest.fixture
def small_problem():
    return make_problem()
