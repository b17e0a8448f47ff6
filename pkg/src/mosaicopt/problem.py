"""Target-image partition, block/tile fitness, and incremental assignment state."""

from __future__ import annotations

from operator import sub

import numpy as np
from PIL import Image

# Below this many values per tile, a pure-Python sum over lists beats the
# numpy call overhead; the optimizer loop leans on this for small instances.
_SMALL_TILE_VALUES = 32


class FenwickTree:
    """Prefix sums over non-negative weights, with O(log n) update and sampling."""

    __slots__ = ("size", "_tree", "_values", "_total", "_top_bit")

    def __init__(self, values):
        values = [float(v) for v in values]
        if not values:
            raise ValueError("FenwickTree needs at least one weight")
        if min(values) < 0.0:
            raise ValueError("weights must be non-negative")
        size = len(values)
        tree = [0.0] * (size + 1)
        tree[1:] = values
        for i in range(1, size + 1):
            parent = i + (i & -i)
            if parent <= size:
                tree[parent] += tree[i]
        self.size = size
        self._tree = tree
        self._values = values
        self._total = float(np.sum(np.asarray(values)))
        self._top_bit = 1 << (size.bit_length() - 1)

    @property
    def total(self) -> float:
        return self._total

    def value(self, index: int) -> float:
        return self._values[index]

    def update(self, index: int, value: float) -> None:
        if value < 0.0:
            raise ValueError("weights must be non-negative")
        delta = value - self._values[index]
        self._values[index] = value
        self._total += delta
        tree = self._tree
        i = index + 1
        size = self.size
        while i <= size:
            tree[i] += delta
            i += i & -i

    def prefix(self, count: int) -> float:
        """Sum of the first ``count`` weights."""
        total = 0.0
        tree = self._tree
        i = count
        while i > 0:
            total += tree[i]
            i -= i & -i
        return total

    def sample(self, target: float) -> int:
        """Smallest index whose prefix sum exceeds ``target``.

        For ``target`` uniform in [0, total) this draws index i with
        probability value(i)/total; zero-weight entries are never returned.
        """
        tree = self._tree
        size = self.size
        idx = 0
        bit = self._top_bit
        while bit:
            nxt = idx + bit
            if nxt <= size and tree[nxt] <= target:
                idx = nxt
                target -= tree[nxt]
            bit >>= 1
        return idx if idx < size else size - 1


def partition_image(image, n_rows: int, n_cols: int, tile_size) -> np.ndarray:
    """Split an RGB image into (n_rows * n_cols, rows, cols, 3) blocks in [0, 1].

    Blocks are in row-major grid order. If the image is not exactly
    (n_rows*rows) x (n_cols*cols) pixels it is first resized (bilinear) to
    that shape, so reassembling the blocks reproduces the resized image.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    if n_rows < 1 or n_cols < 1:
        raise ValueError(f"grid must be positive, got {n_rows}x{n_cols}")
    rows, cols = int(tile_size[0]), int(tile_size[1])
    height, width = n_rows * rows, n_cols * cols
    if arr.dtype != np.uint8:
        raise ValueError("expected 8-bit image data")
    if arr.shape[:2] != (height, width):
        resized = Image.fromarray(arr, "RGB").resize((width, height), Image.BILINEAR)
        arr = np.asarray(resized, dtype=np.uint8)
    normalized = arr.astype(np.float64) / 255.0
    blocks = (
        normalized.reshape(n_rows, rows, n_cols, cols, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(n_rows * n_cols, rows, cols, 3)
    )
    return np.ascontiguousarray(blocks)


class MosaicProblem:
    """One mosaic instance: target blocks, tile database, and the reuse cap."""

    def __init__(self, db, blocks, n_rows: int, n_cols: int, n_redu: int):
        blocks = np.ascontiguousarray(np.asarray(blocks, dtype=np.float64))
        rows, cols = db.tile_size
        n_blocks = n_rows * n_cols
        if blocks.shape != (n_blocks, rows, cols, 3):
            raise ValueError(
                f"blocks shape {blocks.shape} does not match grid "
                f"{n_rows}x{n_cols} of {rows}x{cols} tiles"
            )
        if n_redu < 1:
            raise ValueError(f"n_redu must be >= 1, got {n_redu}")
        if db.n * n_redu < n_blocks:
            raise ValueError(
                f"infeasible: {db.n} tiles * n_redu {n_redu} < {n_blocks} blocks"
            )
        self.db = db
        self.blocks = blocks
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.n_blocks = n_blocks
        self.n_redu = int(n_redu)
        self.n_tiles = db.n
        self.values_per_tile = rows * cols * 3
        self._inv_values = 1.0 / self.values_per_tile
        self.blocks_flat = blocks.reshape(n_blocks, self.values_per_tile)
        self.tiles_flat = np.ascontiguousarray(
            db.pixel_stack().reshape(db.n, self.values_per_tile)
        )
        self._small = self.values_per_tile <= _SMALL_TILE_VALUES
        if self._small:
            self._block_rows = [row.tolist() for row in self.blocks_flat]
            self._tile_rows = [row.tolist() for row in self.tiles_flat]

    @classmethod
    def from_image(cls, image, db, n_rows, n_cols, n_redu):
        blocks = partition_image(image, n_rows, n_cols, db.tile_size)
        return cls(db, blocks, n_rows, n_cols, n_redu)

    def block_tile_mae(self, block_index: int, tile_id: int) -> float:
        """Mean absolute intensity error between a block and a tile, in [0, 1].

        One call is one fitness evaluation; optimizers meter their budget by
        counting calls.
        """
        if not 0 <= block_index < self.n_blocks:
            raise IndexError(f"block index {block_index} out of range [0, {self.n_blocks})")
        if not 0 <= tile_id < self.n_tiles:
            raise IndexError(f"tile id {tile_id} out of range [0, {self.n_tiles})")
        if self._small:
            return (
                sum(map(abs, map(sub, self._block_rows[block_index], self._tile_rows[tile_id])))
                * self._inv_values
            )
        diff = self.blocks_flat[block_index] - self.tiles_flat[tile_id]
        np.abs(diff, out=diff)
        return float(diff.sum()) * self._inv_values

    def block_tile_mae_row(self, block_index: int) -> np.ndarray:
        """MAE of one block against every tile; counts as n_tiles evaluations."""
        if not 0 <= block_index < self.n_blocks:
            raise IndexError(f"block index {block_index} out of range [0, {self.n_blocks})")
        out = np.empty(self.n_tiles, dtype=np.float64)
        block = self.blocks_flat[block_index]
        # chunked to bound the (chunk, values) temporary
        chunk = max(1, min(self.n_tiles, (1 << 22) // max(1, self.values_per_tile)))
        for start in range(0, self.n_tiles, chunk):
            stop = min(start + chunk, self.n_tiles)
            diff = self.tiles_flat[start:stop] - block
            np.abs(diff, out=diff)
            out[start:stop] = diff.sum(axis=1)
        out *= self._inv_values
        return out


class Assignment:
    """Tile-per-block decision vector plus the caches the optimizer loop needs.

    Maintains, incrementally: per-tile usage counts, per-block fitness, their
    running sum, and a Fenwick tree for fitness-proportional block sampling.
    Single-writer: one solver owns an instance at a time.
    """

    def __init__(self, problem: MosaicProblem, x, per_block_fitness):
        x = [int(v) for v in x]
        fitness = [float(v) for v in per_block_fitness]
        if len(x) != problem.n_blocks or len(fitness) != problem.n_blocks:
            raise ValueError("assignment length does not match block count")
        usage = [0] * problem.n_tiles
        for tile_id in x:
            if not 0 <= tile_id < problem.n_tiles:
                raise ValueError(f"tile id {tile_id} out of range")
            usage[tile_id] += 1
        worst = max(usage) if usage else 0
        if worst > problem.n_redu:
            raise ValueError(f"a tile is used {worst} times, n_redu is {problem.n_redu}")
        self.problem = problem
        self.x = x
        self.usage = usage
        self.per_block_fitness = fitness
        self.fitness_sum = float(np.sum(np.asarray(fitness)))
        self.nonzero_blocks = sum(1 for value in fitness if value != 0.0)
        self._tree = FenwickTree(fitness)

    @property
    def overall_fitness(self) -> float:
        """Mean per-block fitness; the minimization objective."""
        return self.fitness_sum / self.problem.n_blocks

    @property
    def is_perfect(self) -> bool:
        """True when every block matches its tile exactly."""
        return self.nonzero_blocks == 0

    def sample_block(self, rng) -> int:
        """Draw a block index with probability proportional to its fitness."""
        total = self._tree.total
        if total <= 0.0:
            raise ValueError("all blocks match exactly; nothing left to sample")
        return self._tree.sample(rng.random() * total)

    def apply_mutation(self, block_index: int, tile_id: int, new_fitness: float) -> None:
        """Commit ``x[block_index] = tile_id`` with its precomputed fitness.

        Precondition (asserted): the move respects the reuse cap and strictly
        improves the block's fitness.
        """
        fitness = self.per_block_fitness
        assert self.usage[tile_id] < self.problem.n_redu
        assert new_fitness < fitness[block_index]
        old_tile = self.x[block_index]
        self.x[block_index] = tile_id
        self.usage[old_tile] -= 1
        self.usage[tile_id] += 1
        # the delta of an accepted move is a negative float, so the running
        # sum never increases and convergence logs stay exactly monotone
        self.fitness_sum += new_fitness - fitness[block_index]
        fitness[block_index] = new_fitness
        self._tree.update(block_index, new_fitness)
        if new_fitness == 0.0:
            # the replaced value was nonzero (strict improvement over >= 0)
            self.nonzero_blocks -= 1
            if self.nonzero_blocks == 0:
                # the true sum is exactly zero; drop the accumulated drift
                self.fitness_sum = 0.0

    def refresh(self) -> None:
        """Recompute the running sum and sampler tree from the per-block values."""
        self.fitness_sum = float(np.sum(np.asarray(self.per_block_fitness)))
        self.nonzero_blocks = sum(1 for value in self.per_block_fitness if value != 0.0)
        self._tree = FenwickTree(self.per_block_fitness)
