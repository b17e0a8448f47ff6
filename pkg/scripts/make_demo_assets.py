#!/usr/bin/env python3
"""Generate a synthetic tile directory and target image for trying the CLI.

Example:
    python scripts/make_demo_assets.py --out-dir demo --tiles 1000
    mosaicopt ingest --tiles demo/tiles --tile-size 32x32 --cache demo/tiles.cache
    mosaicopt cluster --cache demo/tiles.cache --clusters 90 --bins 15 --seed 0 \
        --out demo/model.npz
    mosaicopt solve --image demo/target.png --cache demo/tiles.cache \
        --clusters-model demo/model.npz --grid 20x25 --nredu 5 \
        --max-evals 200000 --seed 0 --out-image demo/mosaic.png
"""

import argparse
from pathlib import Path

from PIL import Image

from mosaicopt.synth import make_target_image, write_tile_directory


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="demo")
    parser.add_argument("--tiles", type=int, default=1000)
    parser.add_argument("--tile-size", type=int, default=32)
    parser.add_argument("--target-size", type=int, nargs=2, default=(640, 800),
                        metavar=("HEIGHT", "WIDTH"))
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    out = Path(args.out_dir)
    paths = write_tile_directory(out / "tiles", args.tiles,
                                 (args.tile_size, args.tile_size), seed=args.seed)
    target = make_target_image(args.target_size[0], args.target_size[1],
                               seed=args.seed + 1)
    target_path = out / "target.png"
    Image.fromarray(target, "RGB").save(target_path)
    print(f"wrote {len(paths)} tiles to {out / 'tiles'}")
    print(f"wrote target image to {target_path}")


if __name__ == "__main__":
    main()
