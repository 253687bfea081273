"""Cartesian cut-cell solver on the unit ball against the radial solver, by grid size."""

import argparse
import time

from hartree_shape.geometry import Ball
from hartree_shape.hartree import SolverConfig, radial_profile_deviation, solve_ground_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=float, default=1.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[24, 32, 48, 64])
    args = ap.parse_args()
    ref = solve_ground_state(Ball(1.0), args.q)
    print(f"radial E = {ref.E:.10f}")
    print("n, E, rel_energy, rel_rms, seconds")
    for n in args.sizes:
        t0 = time.perf_counter()
        cfg = SolverConfig(discretization="cartesian", cartesian_n=n, theta=1.0)
        gs = solve_ground_state(Ball(1.0), args.q, cfg)
        dev = radial_profile_deviation(gs, ref)
        print(f"{n}, {gs.E:.8f}, {dev['rel_energy']:.3e}, {dev['rel_rms']:.3e}, {time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
