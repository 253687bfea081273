"""Union-of-balls competitor against the unit ball for large charge, with solver values."""

import argparse
import csv
import sys

import numpy as np

from hartree_shape import asymptotics
from hartree_shape.geometry import Ball
from hartree_shape.hartree import solve_ground_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q-min", type=float, default=1.0)
    ap.add_argument("--q-max", type=float, default=1e4)
    ap.add_argument("--num", type=int, default=25)
    args = ap.parse_args()
    qs = np.geomspace(args.q_min, args.q_max, args.num)
    print(f"# D(w_B^2, w_B^2) = {asymptotics.coulomb_constant():.10f}", file=sys.stderr)
    print(f"# crossing q = {asymptotics.crossing_charge():.4f}", file=sys.stderr)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["q", "N_star", "U", "q/4", "E_ball", "diameter_bound"])
    for q in qs:
        comp = asymptotics.optimal_competitor(q)
        E_ball = solve_ground_state(Ball(1.0), q).E
        w.writerow([q, comp.N_star, comp.energy, q / 4, E_ball, asymptotics.diameter_lower_bound(q, comp.energy)])
    U = [asymptotics.optimal_competitor(q).energy for q in qs[qs >= 100]]
    if len(U) > 1:
        print(f"# log-log slope of U over q >= 100: {asymptotics.loglog_slope(qs[qs >= 100], U):.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
