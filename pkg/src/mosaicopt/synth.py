"""Deterministic synthetic tiles and target images for demos and benchmarks.

Tiles get one base color each plus texture noise, so nearest-color matching
is meaningful and histogram clusters correspond to color neighborhoods.
Targets are smooth random color fields. All values are quantized to the 8-bit
grid, matching what ingestion of real images would produce.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .tiledb import TileDatabase, quantize_u8


def make_tile_stack(n: int, tile_size, seed: int, color_noise: float = 0.15) -> np.ndarray:
    """(n, rows, cols, 3) float64 tile pixels on the 8-bit grid."""
    rows, cols = int(tile_size[0]), int(tile_size[1])
    rng = np.random.default_rng(seed)
    base = rng.random((n, 1, 1, 3))
    noise = rng.normal(0.0, color_noise, size=(n, rows, cols, 3))
    pixels = np.clip(base + noise, 0.0, 1.0)
    return quantize_u8(pixels).astype(np.float64) / 255.0


def make_tile_database(n: int, tile_size, seed: int, bins: int = 15,
                       color_noise: float = 0.15) -> TileDatabase:
    stack = make_tile_stack(n, tile_size, seed, color_noise)
    paths = [f"synthetic://tile/{i}" for i in range(n)]
    return TileDatabase(tile_size, stack, paths, bins)


def make_target_image(height: int, width: int, seed: int,
                      coarse=(5, 4), noise_sd: float = 6.0) -> np.ndarray:
    """Smooth random color field as an (height, width, 3) uint8 array."""
    rng = np.random.default_rng(seed)
    grid = (rng.random((coarse[0], coarse[1], 3)) * 255).astype(np.uint8)
    smooth = Image.fromarray(grid, "RGB").resize((width, height), Image.BILINEAR)
    arr = np.asarray(smooth, dtype=np.float64)
    arr += rng.normal(0.0, noise_sd, size=arr.shape)
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def write_tile_directory(directory, n: int, tile_size, seed: int,
                         color_noise: float = 0.15) -> list[str]:
    """Write n synthetic tiles as PNGs; returns the created paths."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    stack = make_tile_stack(n, tile_size, seed, color_noise)
    width = len(str(n - 1)) if n > 1 else 1
    paths = []
    for i in range(n):
        path = out / f"tile_{i:0{width}d}.png"
        Image.fromarray(quantize_u8(stack[i]), "RGB").save(path, format="PNG")
        paths.append(str(path))
    return paths
