"""Tile database: ingest candidate tile images, histogram them, cache to disk."""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

CACHE_MAGIC = b"MOTC"
CACHE_VERSION = 1

_HEADER = struct.Struct("<4sIIIQI")  # magic, version, rows, cols, n_tiles, bins
_U32 = struct.Struct("<I")


class TileCacheError(RuntimeError):
    """A tile cache file is missing, corrupt, or incompatible with the request."""


@dataclass
class Tile:
    """One candidate tile; pixels are (rows, cols, 3) float64 intensities in [0, 1]."""

    id: int
    source_path: str
    pixels: np.ndarray


@dataclass
class Histogram:
    """Concatenated per-channel color histogram; each channel's bins sum to 1."""

    values: np.ndarray
    bins: int


class TileDatabase:
    """Immutable collection of resized tiles plus their color histograms.

    Pixel data is held in one (n, rows, cols, 3) float64 array; the ``tiles``
    list exposes per-tile views into it. Intensities are stored as k/255 so
    the 8-bit cache round-trip is bit-exact.
    """

    def __init__(self, tile_size, pixel_stack, source_paths, bins,
                 histograms=None, skipped=()):
        rows, cols = int(tile_size[0]), int(tile_size[1])
        stack = np.asarray(pixel_stack, dtype=np.float64)
        if stack.ndim != 4 or stack.shape[1:] != (rows, cols, 3):
            raise ValueError(
                f"pixel stack shape {stack.shape} does not match tile size {rows}x{cols}"
            )
        if len(source_paths) != stack.shape[0]:
            raise ValueError("source_paths length does not match pixel stack")
        self.tile_size = (rows, cols)
        self.bins = int(bins)
        self._stack = stack
        self.tiles = [
            Tile(i, str(p), stack[i]) for i, p in enumerate(source_paths)
        ]
        if histograms is None:
            histograms = _histogram_matrix(stack, self.bins)
        self.histograms = np.asarray(histograms, dtype=np.float64)
        if self.histograms.shape != (stack.shape[0], 3 * self.bins):
            raise ValueError("histogram matrix shape mismatch")
        self.skipped = list(skipped)

    @property
    def n(self) -> int:
        return len(self.tiles)

    def pixel_stack(self) -> np.ndarray:
        """The (n, rows, cols, 3) backing array shared by all tiles."""
        return self._stack

    def histogram_matrix(self, bins: int) -> np.ndarray:
        """Histograms at the requested bin count, recomputed if it differs."""
        if int(bins) == self.bins:
            return self.histograms
        return _histogram_matrix(self._stack, int(bins))


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] intensities to 8-bit, rounding halves up."""
    return np.clip(np.floor(values * 255.0 + 0.5), 0, 255).astype(np.uint8)


def compute_histogram(tile, bins: int) -> Histogram:
    """Per-channel histogram of a tile's intensities, concatenated R|G|B.

    Bin i of a channel counts values in [i/bins, (i+1)/bins), except the last
    bin which also includes 1.0. Each channel is normalized to sum to 1.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    pixels = np.asarray(getattr(tile, "pixels", tile), dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (rows, cols, 3) pixels, got shape {pixels.shape}")
    idx = (pixels * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    count = pixels.shape[0] * pixels.shape[1]
    values = np.empty(3 * bins, dtype=np.float64)
    for channel in range(3):
        tally = np.bincount(idx[:, :, channel].ravel(), minlength=bins)
        values[channel * bins:(channel + 1) * bins] = tally / count
    return Histogram(values=values, bins=bins)


def _histogram_matrix(stack: np.ndarray, bins: int) -> np.ndarray:
    """Histograms for every tile in one pass; rows match compute_histogram."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    n, rows, cols, _ = stack.shape
    if n == 0:
        return np.zeros((0, 3 * bins), dtype=np.float64)
    idx = (stack * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    # one flat bincount: key = ((tile * 3) + channel) * bins + bin
    channel = np.arange(3, dtype=np.int64)[None, None, None, :]
    tile = np.arange(n, dtype=np.int64)[:, None, None, None]
    keys = (tile * 3 + channel) * bins + idx
    tally = np.bincount(keys.ravel(), minlength=n * 3 * bins)
    return tally.reshape(n, 3 * bins).astype(np.float64) / (rows * cols)


def ingest_tiles(directory, tile_size, bins: int = 15) -> TileDatabase:
    """Load every decodable image under ``directory`` as a tile.

    Files are visited in sorted path order so ingestion is deterministic.
    Images are converted to RGB, resized (bilinear) to ``tile_size`` and
    normalized to [0, 1]. Undecodable files are skipped with a warning and
    recorded in the returned database's skip report.
    """
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"tile directory not found: {root}")
    rows, cols = int(tile_size[0]), int(tile_size[1])
    if rows < 1 or cols < 1:
        raise ValueError(f"tile size must be positive, got {rows}x{cols}")

    paths = sorted(p for p in root.rglob("*") if p.is_file())
    arrays = []
    kept_paths = []
    skipped = []
    for path in paths:
        try:
            with Image.open(path) as img:
                img = img.convert("RGB")
                if img.size != (cols, rows):
                    img = img.resize((cols, rows), Image.BILINEAR)
                arrays.append(np.asarray(img, dtype=np.uint8))
            kept_paths.append(path)
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            log.warning("skipping undecodable tile %s: %s", path, exc)
            skipped.append((str(path), str(exc)))
    if not arrays:
        raise ValueError(f"no decodable tile images found in {root}")

    stack = np.stack(arrays).astype(np.float64) / 255.0
    return TileDatabase((rows, cols), stack, kept_paths, bins, skipped=skipped)


def save_cache(db: TileDatabase, path) -> None:
    """Write the database to a binary cache file.

    Layout (little-endian): header ``magic "MOTC" | version u32 | rows u32 |
    cols u32 | n u64 | bins u32``, then per tile ``path_len u32 | path utf-8 |
    rows*cols*3 pixel bytes (8-bit, round-half-up) | 3*bins float64 histogram``,
    then a trailing CRC32 (u32) of everything before it.
    """
    rows, cols = db.tile_size
    buf = bytearray()
    buf += _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, rows, cols, db.n, db.bins)
    for tile, hist_row in zip(db.tiles, db.histograms):
        encoded = tile.source_path.encode("utf-8")
        buf += _U32.pack(len(encoded))
        buf += encoded
        buf += quantize_u8(tile.pixels).tobytes()
        buf += np.ascontiguousarray(hist_row, dtype=np.float64).tobytes()
    buf += _U32.pack(zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(buf))


def load_cache(path, expected_tile_size=None) -> TileDatabase:
    """Reload a cache written by :func:`save_cache`.

    Verifies magic, version, and the trailing checksum before trusting any
    record. ``expected_tile_size`` guards callers that require a specific
    tile geometry.
    """
    path = Path(path)
    if not path.is_file():
        raise TileCacheError(f"cache file not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size + _U32.size:
        raise TileCacheError(f"cache file truncated or empty: {path}")
    (stored_crc,) = _U32.unpack_from(data, len(data) - _U32.size)
    body = data[:-_U32.size]
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise TileCacheError(f"cache checksum mismatch: {path}")
    magic, version, rows, cols, n, bins = _HEADER.unpack_from(body, 0)
    if magic != CACHE_MAGIC:
        raise TileCacheError(f"not a tile cache (bad magic): {path}")
    if version != CACHE_VERSION:
        raise TileCacheError(
            f"unsupported cache version {version} (expected {CACHE_VERSION}): {path}"
        )
    if expected_tile_size is not None:
        expected = (int(expected_tile_size[0]), int(expected_tile_size[1]))
        if (rows, cols) != expected:
            raise TileCacheError(
                f"cache tile size {rows}x{cols} does not match requested "
                f"{expected[0]}x{expected[1]}: {path}"
            )

    pixel_bytes = rows * cols * 3
    hist_bytes = 3 * bins * 8
    offset = _HEADER.size
    stack_u8 = np.empty((n, rows, cols, 3), dtype=np.uint8)
    histograms = np.empty((n, 3 * bins), dtype=np.float64)
    paths = []
    for i in range(n):
        try:
            (path_len,) = _U32.unpack_from(body, offset)
            offset += _U32.size
            raw_path = body[offset:offset + path_len]
            if len(raw_path) != path_len:
                raise struct.error("short read")
            offset += path_len
            raw_px = body[offset:offset + pixel_bytes]
            if len(raw_px) != pixel_bytes:
                raise struct.error("short read")
            offset += pixel_bytes
            raw_hist = body[offset:offset + hist_bytes]
            if len(raw_hist) != hist_bytes:
                raise struct.error("short read")
            offset += hist_bytes
        except struct.error as exc:
            raise TileCacheError(f"cache record {i} truncated: {path}") from exc
        paths.append(raw_path.decode("utf-8"))
        stack_u8[i] = np.frombuffer(raw_px, dtype=np.uint8).reshape(rows, cols, 3)
        histograms[i] = np.frombuffer(raw_hist, dtype=np.float64)
    if offset != len(body):
        raise TileCacheError(f"cache has {len(body) - offset} trailing bytes: {path}")

    stack = stack_u8.astype(np.float64) / 255.0
    return TileDatabase((rows, cols), stack, paths, bins, histograms=histograms)
