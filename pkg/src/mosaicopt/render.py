"""Compose the output mosaic image from an assignment."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .tiledb import quantize_u8


def assemble_blocks(blocks: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Inverse of the partition: lay row-major blocks back into one image array."""
    n_blocks, rows, cols, channels = blocks.shape
    if n_blocks != n_rows * n_cols:
        raise ValueError(f"{n_blocks} blocks do not fill a {n_rows}x{n_cols} grid")
    return (
        blocks.reshape(n_rows, n_cols, rows, cols, channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(n_rows * rows, n_cols * cols, channels)
    )


def render(problem, assignment) -> np.ndarray:
    """Compose the mosaic as an 8-bit RGB array of the full target size.

    ``assignment`` may be an :class:`~mosaicopt.problem.Assignment` or any
    sequence of tile ids in row-major block order. Pure function: neither
    argument is modified.
    """
    x = np.asarray(getattr(assignment, "x", assignment), dtype=np.int64)
    if x.shape != (problem.n_blocks,):
        raise ValueError(f"assignment length {x.shape} does not match {problem.n_blocks} blocks")
    if x.size and (x.min() < 0 or x.max() >= problem.n_tiles):
        raise ValueError("assignment contains out-of-range tile ids")
    chosen = problem.db.pixel_stack()[x]
    image = assemble_blocks(chosen, problem.n_rows, problem.n_cols)
    return quantize_u8(image)


def write_png(image_u8: np.ndarray, path) -> None:
    Image.fromarray(image_u8, "RGB").save(path, format="PNG")
