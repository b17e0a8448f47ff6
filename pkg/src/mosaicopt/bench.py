"""Benchmark harness: multi-seed solver runs, convergence CSVs, and rank statistics."""

from __future__ import annotations

import json
import logging
import math
import multiprocessing
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from .clustering import kmeans
from .optimizers import CepParams, ConvergenceLog, cep_solve, greedy_solve, rii_solve
from .problem import MosaicProblem
from .tiledb import ingest_tiles, load_cache

log = logging.getLogger(__name__)

KNOWN_ALGORITHMS = ("cep", "rii", "greedy")

SUMMARY_HEADER = "algorithm,image,seed,final_mae,evaluations,wall_ms"
CONVERGENCE_HEADER = "evaluations,fitness,wall_ms"


@dataclass
class RunSummary:
    """One benchmark cell: an (algorithm, image, seed) solve."""

    algorithm: str
    image: str
    seed: int
    final_mae: float
    evaluations: int
    wall_ms: int


@dataclass
class ExperimentConfig:
    """Declarative benchmark description; see README for the JSON schema."""

    images: list[str]
    out_dir: str
    cache: str | None = None
    tiles_dir: str | None = None
    tile_size: tuple[int, int] = (32, 32)
    grid: tuple[int, int] = (80, 100)
    n_redu: int = 5
    bins: int = 15
    clusters: int = 90
    cluster_seed: int = 0
    alpha: float = 0.75
    max_evaluations: int = 1_600_000
    seeds: list[int] = field(default_factory=lambda: [0])
    algorithms: list[str] = field(default_factory=lambda: ["cep", "rii", "greedy"])
    jobs: int = 1
    log_stride: int = 1000

    def __post_init__(self):
        if not self.images:
            raise ValueError("config needs at least one target image")
        if not self.seeds:
            raise ValueError("config needs at least one seed")
        if self.cache is None and self.tiles_dir is None:
            raise ValueError("config needs either a tile cache or a tiles directory")
        unknown = [a for a in self.algorithms if a not in KNOWN_ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; choose from {KNOWN_ALGORITHMS}")
        self.tile_size = (int(self.tile_size[0]), int(self.tile_size[1]))
        self.grid = (int(self.grid[0]), int(self.grid[1]))
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def _image_key(path: str) -> str:
    stem = Path(path).stem
    return re.sub(r"[^A-Za-z0-9_-]", "_", stem) or "image"


def write_convergence_csv(log_: ConvergenceLog, path) -> None:
    lines = [CONVERGENCE_HEADER]
    lines += [f"{e},{f!r},{w}" for e, f, w in log_.samples]
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_csv(summaries: list[RunSummary], path) -> None:
    lines = [SUMMARY_HEADER]
    lines += [
        f"{s.algorithm},{s.image},{s.seed},{s.final_mae!r},{s.evaluations},{s.wall_ms}"
        for s in summaries
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# Cell context is installed in the parent process before worker forks, so the
# (large, immutable) problems and cluster model are inherited, not pickled.
_CELL_CONTEXT = None


@dataclass
class _CellContext:
    config: ExperimentConfig
    problems: dict[str, MosaicProblem]
    model: object
    out_dir: Path


def _run_cell(cell):
    algorithm, image_key, seed = cell
    ctx = _CELL_CONTEXT
    problem = ctx.problems[image_key]
    params = CepParams(
        alpha=ctx.config.alpha,
        max_evaluations=ctx.config.max_evaluations,
        seed=seed,
        log_stride=ctx.config.log_stride,
    )
    try:
        if algorithm == "cep":
            result = cep_solve(problem, ctx.model, params)
        elif algorithm == "rii":
            result = rii_solve(problem, params)
        elif algorithm == "greedy":
            result = greedy_solve(problem)
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    except Exception as exc:  # noqa: BLE001 - a failed cell must not sink the others
        return ("failed", cell, f"{type(exc).__name__}: {exc}")
    write_convergence_csv(
        result.log, ctx.out_dir / f"convergence_{algorithm}_{image_key}_{seed}.csv"
    )
    summary = RunSummary(
        algorithm=algorithm,
        image=image_key,
        seed=seed,
        final_mae=result.log.final_fitness,
        evaluations=result.evaluations_used,
        wall_ms=int(result.wall_time * 1000),
    )
    return ("ok", cell, summary)


def run_experiment(config: ExperimentConfig) -> list[RunSummary]:
    """Run every (algorithm, image, seed) cell and write the CSV outputs.

    Greedy is deterministic, so it runs once per image. Cells are independent
    and run ``config.jobs`` at a time in forked workers; results are identical
    for a fixed seed set regardless of the schedule. Cells with unreadable
    inputs are marked failed and the rest proceed.
    """
    global _CELL_CONTEXT
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if config.cache is not None:
        db = load_cache(config.cache, expected_tile_size=config.tile_size)
    else:
        db = ingest_tiles(config.tiles_dir, config.tile_size, bins=config.bins)

    model = None
    if "cep" in config.algorithms:
        model = kmeans(db.histogram_matrix(config.bins), config.clusters, config.cluster_seed)

    problems: dict[str, MosaicProblem] = {}
    failures: list[tuple] = []
    readable_images: list[str] = []
    for image_path in config.images:
        key = _image_key(image_path)
        try:
            with Image.open(image_path) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
            problems[key] = MosaicProblem.from_image(
                arr, db, config.grid[0], config.grid[1], config.n_redu
            )
            readable_images.append(key)
        except Exception as exc:  # noqa: BLE001
            log.warning("image %s unreadable, marking its cells failed: %s", image_path, exc)
            failures.append((("*", key, "*"), f"{type(exc).__name__}: {exc}"))

    cells = []
    for key in readable_images:
        for algorithm in config.algorithms:
            if algorithm == "greedy":
                cells.append((algorithm, key, config.seeds[0]))
            else:
                cells.extend((algorithm, key, seed) for seed in config.seeds)

    _CELL_CONTEXT = _CellContext(config, problems, model, out_dir)
    try:
        use_pool = config.jobs > 1 and len(cells) > 1
        if use_pool:
            try:
                mp = multiprocessing.get_context("fork")
            except ValueError:
                log.warning("fork start method unavailable; running cells serially")
                use_pool = False
        if use_pool:
            with mp.Pool(processes=min(config.jobs, len(cells))) as pool:
                outcomes = pool.map(_run_cell, cells)
        else:
            outcomes = [_run_cell(cell) for cell in cells]
    finally:
        _CELL_CONTEXT = None

    summaries = []
    for status, cell, payload in outcomes:
        if status == "ok":
            summaries.append(payload)
        else:
            log.warning("cell %s failed: %s", cell, payload)
            failures.append((cell, payload))
    write_summary_csv(summaries, out_dir / "summary.csv")
    return summaries


@lru_cache(maxsize=None)
def _u_statistic_counts(n1: int, n2: int) -> tuple:
    """Number of rank arrangements per U value, for tie-free samples.

    Built from the standard recurrence counts(a, b, u) =
    counts(a-1, b, u-b) + counts(a, b-1, u); entry u of the result counts the
    C(n1+n2, n1) arrangements whose first-sample U statistic equals u.
    """
    table: dict[tuple[int, int], list[int]] = {}
    for a in range(n1 + 1):
        for b in range(n2 + 1):
            if a == 0 or b == 0:
                table[(a, b)] = [1]
                continue
            counts = [0] * (a * b + 1)
            left = table[(a - 1, b)]
            for u, c in enumerate(left):
                counts[u + b] += c
            right = table[(a, b - 1)]
            for u, c in enumerate(right):
                counts[u] += c
            table[(a, b)] = counts
    return tuple(table[(n1, n2)])


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


# Exact enumeration is used when the smaller sample is at most this large
# (and the data is tie-free); larger samples get the normal approximation.
EXACT_PATH_MAX_MIN_SIZE = 8


def mann_whitney_u(sample_a, sample_b, method: str = "auto") -> tuple[float, float]:
    """Two-sided Mann-Whitney U test; returns (U of sample_a, p-value).

    With ``method="auto"``, tie-free data with min(len) <= 8 takes an
    exact-enumeration path; larger or tied data uses the normal approximation
    with midranks, tie-corrected variance, and a continuity correction.
    ``method="exact"`` and ``method="asymptotic"`` pin one path (exact
    requires tie-free data). All-identical data yields p = 1.
    """
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    a = np.asarray(list(sample_a), dtype=np.float64)
    b = np.asarray(list(sample_b), dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    combined = np.concatenate([a, b])
    ranks = _midranks(combined)
    u1 = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1

    _, tie_counts = np.unique(combined, return_counts=True)
    tie_free = bool((tie_counts == 1).all())
    if method == "exact" and not tie_free:
        raise ValueError("exact method requires tie-free data")

    use_exact = method == "exact" or (
        method == "auto" and tie_free and min(n1, n2) <= EXACT_PATH_MAX_MIN_SIZE
    )
    if use_exact:
        counts = _u_statistic_counts(n1, n2)
        u_min = int(round(min(u1, u2)))
        total = float(sum(counts))
        p = 2.0 * sum(counts[:u_min + 1]) / total
        return u1, min(1.0, p)

    total_n = n1 + n2
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    variance = n1 * n2 / 12.0 * ((total_n + 1) - tie_term / (total_n * (total_n - 1)))
    if variance <= 0.0:
        return u1, 1.0
    z = (max(u1, u2) - n1 * n2 / 2.0 - 0.5) / math.sqrt(variance)
    p = math.erfc(z / math.sqrt(2.0))
    return u1, min(1.0, p)


_TABLE_LABELS = (
    "Average MAE value",
    "Standard deviation",
    "P-value",
    "Average running time",
)


@dataclass
class SummaryTable:
    """Per-algorithm mean/sd/p-value/runtime, shaped like the comparison table."""

    algorithms: list[str]
    rows: dict[str, list[str]]

    def to_csv(self) -> str:
        lines = ["metric," + ",".join(self.algorithms)]
        for label in _TABLE_LABELS:
            lines.append(",".join([label] + self.rows[label]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        widths = [max(len(label) for label in _TABLE_LABELS)]
        widths += [
            max(len(alg), *(len(self.rows[label][i]) for label in _TABLE_LABELS))
            for i, alg in enumerate(self.algorithms)
        ]
        header = ["".ljust(widths[0])] + [
            alg.rjust(widths[i + 1]) for i, alg in enumerate(self.algorithms)
        ]
        lines = ["  ".join(header)]
        for label in _TABLE_LABELS:
            cells = [label.ljust(widths[0])] + [
                cell.rjust(widths[i + 1]) for i, cell in enumerate(self.rows[label])
            ]
            lines.append("  ".join(cells))
        return "\n".join(lines)


def summarize(summaries: list[RunSummary], reference: str = "cep") -> SummaryTable:
    """Aggregate run summaries into the comparison table.

    Each algorithm gets its mean final MAE, sample standard deviation, mean
    running time, and a two-sided rank-test p-value against the reference
    algorithm (which itself reads NA).
    """
    if not summaries:
        raise ValueError("no run summaries to aggregate")
    algorithms: list[str] = []
    by_algorithm: dict[str, list[RunSummary]] = {}
    for summary in summaries:
        if summary.algorithm not in by_algorithm:
            algorithms.append(summary.algorithm)
            by_algorithm[summary.algorithm] = []
        by_algorithm[summary.algorithm].append(summary)
    if reference not in by_algorithm:
        raise ValueError(f"reference algorithm {reference!r} has no runs")

    reference_maes = [s.final_mae for s in by_algorithm[reference]]
    means, sds, pvals, times = [], [], [], []
    for algorithm in algorithms:
        maes = [s.final_mae for s in by_algorithm[algorithm]]
        means.append(f"{np.mean(maes):.4f}")
        sds.append(f"{np.std(maes, ddof=1):.4f}" if len(maes) > 1 else "NA")
        if algorithm == reference:
            pvals.append("NA")
        else:
            _, p = mann_whitney_u(maes, reference_maes)
            pvals.append(f"{p:.4g}")
        mean_seconds = np.mean([s.wall_ms for s in by_algorithm[algorithm]]) / 1000.0
        times.append(f"{mean_seconds:.2f}s")
    return SummaryTable(
        algorithms=algorithms,
        rows={
            _TABLE_LABELS[0]: means,
            _TABLE_LABELS[1]: sds,
            _TABLE_LABELS[2]: pvals,
            _TABLE_LABELS[3]: times,
        },
    )
