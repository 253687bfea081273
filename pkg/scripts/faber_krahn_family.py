"""Eigenvalue deficit against Fraenkel asymmetry for a family of nearly spherical sets."""

import argparse
import csv
import sys

import numpy as np

from hartree_shape.geometry import NearlySpherical
from hartree_shape.shapeopt import fk_deficit


def family(seed, count):
    rng = np.random.default_rng(seed)
    modes = [(l, m) for l in range(2, 5) for m in range(-l, l + 1)]
    for k in range(count):
        amp = 0.2 * (k + 1) / count
        c = rng.normal(size=len(modes))
        c *= amp / np.linalg.norm(c)
        yield {mode: float(v) for mode, v in zip(modes, c)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid-n", type=int, default=48)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["shape", "asymmetry", "deficit", "deficit_over_A2"])
    for k, coeffs in enumerate(family(args.seed, args.count)):
        try:
            d = NearlySpherical(1.0, coeffs)
        except ValueError:
            continue
        r = fk_deficit(d, n=args.grid_n)
        ratio = r["deficit"] / r["asymmetry"] ** 2 if r["asymmetry"] > 0 else float("nan")
        w.writerow([k, r["asymmetry"], r["deficit"], ratio])


if __name__ == "__main__":
    main()
