"""Command-line interface: ``hartree-shape {solve,sweep,optimize,asymptotics,nondim}``.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import asymptotics, nondim
from .errors import DescentError, InvalidDomainError, NumericalFailure, ShapeFileError
from .fields import write_csv
from .geometry import Ball, NearlySpherical, fraenkel_asymmetry, load_shape, save_shape
from .hartree import SolverConfig, result_dict, solve_ground_state
from .shapeopt import DescentOptions, shape_descent

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("hartree_shape")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        values = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc
    return values


def _common(p, grid_help):
    p.add_argument("--grid-n", type=int, default=None, help=grid_help)
    p.add_argument("--tol", type=float, default=None, help="convergence tolerance override (see each command)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser():
    parser = _Parser(prog="hartree-shape", description="Hartree ground states and shape optimization on 3D domains.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    grid_solve = (
        "resolution: radial nodes for balls (default 2049, at least 64) or Cartesian "
        "cells per axis otherwise (default 48, at least 8)"
    )
    tol_solve = "Euler-Lagrange residual tolerance (default 1e-7)"

    p = sub.add_parser("solve", help="ground state on one shape; JSON on stdout")
    p.add_argument("shape", help="shape file (JSON)")
    p.add_argument("--q", type=float, required=True, help="charge parameter q >= 0")
    p.add_argument("--cartesian", action="store_true", help="use the Cartesian solver even for balls")
    p.add_argument("--field-csv", help="also write the ground state field to this CSV")
    _common(p, grid_solve)
    p.set_defaults(func=cmd_solve, tol_help=tol_solve)

    p = sub.add_parser("sweep", help="energies over a list of q; CSV q,E,lambda,dirichlet,coulomb,status")
    p.add_argument("shape", help="shape file (JSON)")
    p.add_argument("--q-list", type=_float_list, required=True, help="comma or space separated q values")
    p.add_argument("--cartesian", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="concurrent solves (row order is kept)")
    p.add_argument("--out", help="CSV path (default stdout)")
    _common(p, grid_solve)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="volume-constrained shape descent from a nearly spherical start")
    p.add_argument("shape", help="start shape file (nearly_spherical)")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--l-max", type=int, default=4)
    p.add_argument("--max-iter", type=int, default=12)
    p.add_argument("--out-shape", required=True, help="where to write the final shape (JSON)")
    p.add_argument("--trace", required=True, help="where to write the trace CSV")
    _common(p, "Cartesian cells per axis of the common grid (default 64)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("asymptotics", help="union-of-balls competitor table over a log-spaced q range")
    p.add_argument("--q-min", type=float, default=1.0)
    p.add_argument("--q-max", type=float, default=1e4)
    p.add_argument("--num", type=int, default=41)
    p.add_argument("--solver-check", action="store_true", help="add a column with the solver value of E_q(B_1)")
    p.add_argument("--out", help="CSV path (default stdout)")
    _common(p, "radial nodes for the ball constant and solver check (default 4097 / 2049)")
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("nondim", help="dimensionless q and energy prefactor from SI parameters")
    p.add_argument("params", help='JSON {"m_star_kg", "n_pairs", "epsilon_r", "volume_m3"}')
    _common(p, "accepted for uniformity; unused")
    p.set_defaults(func=cmd_nondim)
    return parser


# --------------------------------------------------------------------------


def _solver_config(args, domain, force_cartesian=False):
    cfg = SolverConfig()
    if args.tol is not None:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        cfg = replace(cfg, tol_residual=args.tol)
    radial = isinstance(domain, Ball) and not force_cartesian
    if force_cartesian:
        cfg = replace(cfg, discretization="cartesian")
    if args.grid_n is not None:
        minimum = 64 if radial else 8
        if args.grid_n < minimum:
            raise UsageError(f"--grid-n must be at least {minimum}")
        cfg = replace(cfg, radial_n=args.grid_n) if radial else replace(cfg, cartesian_n=args.grid_n)
    return cfg


def _check_q(q):
    if not (math.isfinite(q) and q >= 0):
        raise UsageError(f"q must be a nonnegative number, got {q}")


def cmd_solve(args):
    _check_q(args.q)
    d = load_shape(args.shape)
    cfg = _solver_config(args, d, args.cartesian)
    try:
        gs = solve_ground_state(d, args.q, cfg)
    except NumericalFailure as exc:
        json.dump({"status": "failed", "error": str(exc), "residual": exc.residual}, sys.stdout)
        sys.stdout.write("\n")
        return EXIT_NUMERICAL
    if args.field_csv:
        write_csv(gs.u, args.field_csv)
    json.dump(result_dict(gs), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def cmd_sweep(args):
    if not args.q_list:
        raise UsageError("--q-list must contain at least one value")
    for q in args.q_list:
        _check_q(q)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    d = load_shape(args.shape)
    cfg = _solver_config(args, d, args.cartesian)

    def run(q):
        try:
            gs = solve_ground_state(d, q, cfg)
            return [q, gs.E, gs.lambda_q, gs.breakdown.dirichlet, gs.breakdown.coulomb, "ok"]
        except NumericalFailure as exc:
            log.error("q=%g: %s", q, exc)
            return [q, "", "", "", "", "failed"]

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(run, args.q_list))
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "E", "lambda", "dirichlet", "coulomb", "status"])
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK if all(r[-1] == "ok" for r in rows) else EXIT_NUMERICAL


def cmd_optimize(args):
    _check_q(args.q)
    if args.l_max < 0:
        raise UsageError("--l-max must be nonnegative")
    if args.max_iter < 0:
        raise UsageError("--max-iter must be nonnegative")
    start = load_shape(args.shape)
    if not isinstance(start, NearlySpherical):
        raise UsageError("optimize needs a nearly_spherical start shape")
    opts = DescentOptions(l_max=args.l_max, max_iter=args.max_iter)
    if args.grid_n is not None:
        if args.grid_n < 8:
            raise UsageError("--grid-n must be at least 8")
        opts = replace(opts, grid_n=args.grid_n)
    if args.tol is not None:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        opts = replace(opts, tol=args.tol)
    try:
        final, trace = shape_descent(start, args.q, opts)
    except DescentError as exc:
        exc.trace.write_csv(args.trace)
        log.error("%s", exc)
        return EXIT_NUMERICAL
    save_shape(final, args.out_shape)
    trace.write_csv(args.trace)
    last = trace.records[-1]
    json.dump(
        {"q": args.q, "E": last.E, "asymmetry": last.asymmetry, "iterations": last.iteration,
         "terminated": trace.terminated, "ball_E_same_grid": trace.ball_energy},
        sys.stdout,
        indent=2,
    )
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_asymptotics(args):
    if not (0 < args.q_min <= args.q_max):
        raise UsageError("need 0 < --q-min <= --q-max")
    if args.num < 1:
        raise UsageError("--num must be at least 1")
    if args.grid_n is not None:
        if args.grid_n < 64:
            raise UsageError("--grid-n must be at least 64")
        asymptotics.coulomb_constant.cache_clear()
        Dw = asymptotics.coulomb_constant(args.grid_n)
    else:
        Dw = asymptotics.coulomb_constant()
    log.info("D(w_B^2, w_B^2) = %.10f", Dw)
    qs = np.geomspace(args.q_min, args.q_max, args.num)
    cfg = SolverConfig() if args.grid_n is None else SolverConfig(radial_n=args.grid_n)
    if args.tol is not None:
        cfg = replace(cfg, tol_residual=args.tol)
    fh = _open_out(args.out)
    status = EXIT_OK
    try:
        w = csv.writer(fh, lineterminator="\n")
        header = ["q", "N_star", "U", "q/4", "crossing"]
        if args.solver_check:
            header.append("E_ball")
        w.writerow(header)
        crossed = False
        for q in qs:
            comp = asymptotics.optimal_competitor(float(q))
            below = comp.energy < q / 4.0
            flag = int(below and not crossed)
            crossed = crossed or below
            row = [repr(float(q)), comp.N_star, repr(comp.energy), repr(float(q) / 4.0), flag]
            if args.solver_check:
                try:
                    row.append(repr(solve_ground_state(Ball(1.0), float(q), cfg).E))
                except NumericalFailure as exc:
                    log.error("solver check at q=%g failed: %s", q, exc)
                    row.append("")
                    status = EXIT_NUMERICAL
            w.writerow(row)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return status


def cmd_nondim(args):
    try:
        p = nondim.PhysicalParams.load(args.params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = {
        "q": nondim.charge_parameter(p),
        "length_scale_m": nondim.length_scale(p),
        "energy_prefactor_J": nondim.energy_prefactor(p),
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ShapeFileError, InvalidDomainError) as exc:
        print(f"hartree-shape {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hartree-shape {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
