"""Command-line front door: ingest -> cluster -> solve -> render, plus bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import bench, clustering, optimizers, tiledb
from .problem import MosaicProblem
from .render import render as render_image, write_png


def _parse_pair(text: str) -> tuple[int, int]:
    """Parse 'RxC' (e.g. 32x32 or 80x100) into a positive int pair."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be positive, got {text!r}")
    return rows, cols


def _load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_solution(path, n_rows: int, n_cols: int, x) -> None:
    """Solution file: line 1 is 'n_rows n_cols', then one tile id per block
    in row-major order."""
    lines = [f"{n_rows} {n_cols}"] + [str(int(t)) for t in x]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path) -> tuple[int, int, list[int]]:
    tokens = Path(path).read_text().split()
    if len(tokens) < 3:
        raise ValueError(f"solution file too short: {path}")
    n_rows, n_cols = int(tokens[0]), int(tokens[1])
    x = [int(t) for t in tokens[2:]]
    if len(x) != n_rows * n_cols:
        raise ValueError(
            f"solution file has {len(x)} ids for a {n_rows}x{n_cols} grid: {path}"
        )
    return n_rows, n_cols, x


def _print_params(command: str, pairs) -> None:
    resolved = " ".join(f"{key}={value}" for key, value in pairs)
    print(f"[{command}] parameters: {resolved}")


def _cmd_ingest(args) -> int:
    _print_params("ingest", [
        ("tiles", args.tiles), ("tile_size", f"{args.tile_size[0]}x{args.tile_size[1]}"),
        ("bins", args.bins), ("cache", args.cache),
    ])
    db = tiledb.ingest_tiles(args.tiles, args.tile_size, bins=args.bins)
    tiledb.save_cache(db, args.cache)
    print(f"ingested {db.n} tiles ({len(db.skipped)} skipped) -> {args.cache}")
    return 0


def _cmd_cluster(args) -> int:
    _print_params("cluster", [
        ("cache", args.cache), ("clusters", args.clusters), ("bins", args.bins),
        ("seed", args.seed), ("out", args.out), ("export_text", args.export_text),
    ])
    db = tiledb.load_cache(args.cache)
    model = clustering.kmeans(db.histogram_matrix(args.bins), args.clusters, args.seed)
    clustering.save_model(model, args.out)
    if args.export_text:
        clustering.export_assignment_text(model, args.export_text)
    sizes = [len(m) for m in model.members]
    print(f"clustered {db.n} tiles into {model.n_clusters} clusters "
          f"(sizes {min(sizes)}..{max(sizes)}) -> {args.out}")
    return 0


def _cmd_solve(args) -> int:
    _print_params("solve", [
        ("image", args.image), ("cache", args.cache),
        ("clusters_model", args.clusters_model), ("grid", f"{args.grid[0]}x{args.grid[1]}"),
        ("nredu", args.nredu), ("alpha", args.alpha), ("max_evals", args.max_evals),
        ("algorithm", args.algorithm), ("seed", args.seed),
        ("out_image", args.out_image), ("out_log", args.out_log),
        ("out_solution", args.out_solution),
    ])
    db = tiledb.load_cache(args.cache)
    image = _load_image(args.image)
    problem = MosaicProblem.from_image(image, db, args.grid[0], args.grid[1], args.nredu)
    params = optimizers.CepParams(
        alpha=args.alpha, max_evaluations=args.max_evals, seed=args.seed
    )
    if args.algorithm == "cep":
        if not args.clusters_model:
            raise ValueError("--clusters-model is required for the cep algorithm")
        model = clustering.load_model(args.clusters_model)
        result = optimizers.cep_solve(problem, model, params)
    elif args.algorithm == "rii":
        result = optimizers.rii_solve(problem, params)
    else:
        result = optimizers.greedy_solve(problem)
    print(f"final MAE {result.assignment.overall_fitness:.6f} "
          f"after {result.evaluations_used} evaluations "
          f"in {result.wall_time:.2f}s")
    if args.out_image:
        write_png(render_image(problem, result.assignment), args.out_image)
    if args.out_log:
        bench.write_convergence_csv(result.log, args.out_log)
    if args.out_solution:
        write_solution(args.out_solution, args.grid[0], args.grid[1], result.assignment.x)
    return 0


def _cmd_render(args) -> int:
    _print_params("render", [
        ("image", args.image), ("cache", args.cache),
        ("solution", args.solution), ("out", args.out),
    ])
    db = tiledb.load_cache(args.cache)
    n_rows, n_cols, x = read_solution(args.solution)
    image = _load_image(args.image)
    # the reuse cap is irrelevant for composition; pick one that always fits
    problem = MosaicProblem.from_image(image, db, n_rows, n_cols, n_rows * n_cols)
    write_png(render_image(problem, x), args.out)
    print(f"rendered {n_rows * db.tile_size[0]}x{n_cols * db.tile_size[1]} mosaic -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    config = bench.ExperimentConfig.from_json(args.config)
    _print_params("bench", sorted(vars(config).items()))
    summaries = bench.run_experiment(config)
    if not summaries:
        raise ValueError("every benchmark cell failed")
    reference = "cep" if any(s.algorithm == "cep" for s in summaries) else summaries[0].algorithm
    table = bench.summarize(summaries, reference=reference)
    print(table.to_text())
    print(f"wrote {len(summaries)} run summaries to {config.out_dir}/summary.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosaicopt",
        description="Photomosaic composition via cluster-guided evolutionary search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a tile cache from an image directory")
    p.add_argument("--tiles", required=True, help="directory of candidate tile images")
    p.add_argument("--tile-size", type=_parse_pair, default=(32, 32), metavar="RxC")
    p.add_argument("--bins", type=int, default=15, help="histogram bins per channel")
    p.add_argument("--cache", required=True, help="output cache file")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("cluster", help="fit the tile cluster model")
    p.add_argument("--cache", required=True)
    p.add_argument("--clusters", type=int, default=90)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model file (.npz)")
    p.add_argument("--export-text", default=None,
                   help="also write a 'tile_id cluster_id' text listing")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("solve", help="optimize a mosaic for a target image")
    p.add_argument("--image", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--clusters-model", default=None)
    p.add_argument("--grid", type=_parse_pair, default=(80, 100), metavar="RxC")
    p.add_argument("--nredu", type=int, default=5, help="max uses per tile")
    p.add_argument("--alpha", type=float, default=0.75)
    p.add_argument("--max-evals", type=int, default=1_600_000)
    p.add_argument("--algorithm", choices=["cep", "rii", "greedy"], default="cep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-image", default=None)
    p.add_argument("--out-log", default=None)
    p.add_argument("--out-solution", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("render", help="compose a mosaic from a solution file")
    p.add_argument("--image", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("bench", help="run a benchmark config")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
