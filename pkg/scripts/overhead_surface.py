#!/usr/bin/env python3
"""Tabulate the expected fault-tolerance overhead over failure rate and checkpoint time.

Writes the sweep CSV (failure rate 0..3.5 per hour, checkpoint time 0..140 s
by default) and prints a few anchor cells.
"""

import argparse
import sys

import numpy as np

from lossyckpt import perfmodel as pm


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="overhead_surface.csv")
    parser.add_argument("--lambda-points", type=int, default=36)
    parser.add_argument("--tckp-points", type=int, default=29)
    args = parser.parse_args()

    lams = np.linspace(0.0, 3.5 / 3600.0, args.lambda_points)
    tcks = np.linspace(0.0, 140.0, args.tckp_points)
    rows = pm.sweep_overhead_surface(lams, tcks)
    with open(args.out, "w", newline="") as fh:
        pm.write_overhead_surface_csv(fh, rows)
    print(f"wrote {len(rows)} cells to {args.out}")

    for per_hour, t_ckp in ((0.5, 60.0), (1.0, 120.0), (2.0, 120.0), (3.5, 140.0)):
        ratio = pm.overhead_ratio_traditional(per_hour / 3600.0, t_ckp)
        print(f"  lam = {per_hour:.1f}/hour, t_ckp = {t_ckp:5.1f} s -> "
              f"overhead/productive = {ratio * 100:6.2f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
