"""Photomosaic composition via cluster-guided evolutionary search."""

from .bench import (
    ExperimentConfig,
    RunSummary,
    SummaryTable,
    mann_whitney_u,
    run_experiment,
    summarize,
)
from .clustering import ClusterModel, cluster_of, export_assignment_text, kmeans, load_model, save_model
from .optimizers import (
    CepParams,
    ConvergenceLog,
    SolveResult,
    cep_solve,
    exhaustive_oracle,
    greedy_solve,
    initialize_assignment,
    mutation_threshold,
    rii_solve,
)
from .problem import Assignment, FenwickTree, MosaicProblem, partition_image
from .render import assemble_blocks, render, write_png
from .synth import make_target_image, make_tile_database, make_tile_stack, write_tile_directory
from .tiledb import (
    Histogram,
    Tile,
    TileCacheError,
    TileDatabase,
    compute_histogram,
    ingest_tiles,
    load_cache,
    save_cache,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CepParams",
    "ClusterModel",
    "ConvergenceLog",
    "ExperimentConfig",
    "FenwickTree",
    "Histogram",
    "MosaicProblem",
    "RunSummary",
    "SolveResult",
    "SummaryTable",
    "Tile",
    "TileCacheError",
    "TileDatabase",
    "assemble_blocks",
    "cep_solve",
    "cluster_of",
    "compute_histogram",
    "exhaustive_oracle",
    "export_assignment_text",
    "greedy_solve",
    "ingest_tiles",
    "initialize_assignment",
    "kmeans",
    "load_cache",
    "load_model",
    "make_target_image",
    "make_tile_database",
    "make_tile_stack",
    "mann_whitney_u",
    "mutation_threshold",
    "partition_image",
    "render",
    "rii_solve",
    "run_experiment",
    "save_cache",
    "save_model",
    "summarize",
    "write_png",
    "write_tile_directory",
]
