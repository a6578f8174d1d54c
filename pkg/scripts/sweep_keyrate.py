"""Sweep channel transmittance and compare simulated key rates to the model.

For each transmittance on the grid the script runs full end-to-end snapshots,
estimates (T, eps, K) from the recovered points, and prints the model key
rate evaluated at the same transmittance with the sweep-mean excess noise for
comparison.

Usage::

    python3 scripts/sweep_keyrate.py [--grid 0.05,0.1,...] [--snapshots 2] [--out results/sweep]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from polrx import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", default="0.05,0.1,0.15,0.35,0.42,0.5")
    parser.add_argument("--snapshots", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()

    argv = [
        "sweep",
        "--transmittance",
        args.grid,
        "--snapshots",
        str(args.snapshots),
        "--seed",
        str(args.seed),
    ]
    if args.out:
        argv += ["--out", str(args.out)]
    rc = cli.main(argv)
    if rc:
        return rc
    print("model curve at matching transmittances (eps=0):")
    return cli.main(["keyrate", "--transmittance", args.grid, "--eps-thermal", "0.01"])


if __name__ == "__main__":
    sys.exit(main())
