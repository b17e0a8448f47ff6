#!/usr/bin/env python3
"""Desk-scale benchmark: 30-seed comparison of the three solvers.

Builds a synthetic 1000-tile corpus and a 640x800 target, runs cep and rii
for 30 seeds each (greedy once), and prints the comparison table plus the
rank-test p-values against cep. Writes summary.csv and per-run convergence
CSVs to the output directory.
"""

import argparse
import time
from pathlib import Path

import numpy as np
from PIL import Image

from mosaicopt.bench import ExperimentConfig, mann_whitney_u, run_experiment, summarize
from mosaicopt.synth import make_target_image, make_tile_database
from mosaicopt.tiledb import save_cache


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="desk_benchmark")
    parser.add_argument("--seeds", type=int, default=30)
    parser.add_argument("--budget", type=int, default=200_000)
    parser.add_argument("--jobs", type=int, default=2)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print("building synthetic corpus (1000 tiles, 640x800 target) ...")
    db = make_tile_database(1000, (32, 32), seed=42, bins=15)
    cache = out / "tiles.cache"
    save_cache(db, cache)
    target_path = out / "target.png"
    Image.fromarray(make_target_image(640, 800, seed=7), "RGB").save(target_path)

    config = ExperimentConfig(
        images=[str(target_path)],
        out_dir=str(out / "runs"),
        cache=str(cache),
        tile_size=(32, 32),
        grid=(20, 25),
        n_redu=5,
        bins=15,
        clusters=90,
        alpha=0.75,
        max_evaluations=args.budget,
        seeds=list(range(args.seeds)),
        algorithms=["cep", "rii", "greedy"],
        jobs=args.jobs,
    )
    start = time.perf_counter()
    summaries = run_experiment(config)
    wall = time.perf_counter() - start

    table = summarize(summaries, reference="cep")
    print()
    print(table.to_text())
    print()
    cep = [s.final_mae for s in summaries if s.algorithm == "cep"]
    rii = [s.final_mae for s in summaries if s.algorithm == "rii"]
    _, p = mann_whitney_u(cep, rii)
    print(f"median cep {np.median(cep):.4f} vs rii {np.median(rii):.4f}  "
          f"(two-sided p {p:.3g})")
    print(f"{len(summaries)} runs in {wall:.0f}s; outputs in {out / 'runs'}")


if __name__ == "__main__":
    main()
