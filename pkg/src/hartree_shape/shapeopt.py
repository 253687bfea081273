"""Volume-constrained shape descent over nearly spherical sets.

The design variables are the coefficients of the real harmonics Y_lm with
2 <= l <= l_max.  Constant (l=0) modes are removed by rescaling every trial
shape to unit volume and l=1 modes (infinitesimal translations) are held fixed.
All energies of one descent are computed on a single Cartesian grid, so that
differences between shapes are not polluted by changes of resolution.
"""

from __future__ import annotations

import csv
import logging
import time
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DescentError, DiagnosticsError, InvalidDomainError, NumericalFailure
from .fields import DIRECTIONS
from .geometry import (
    UNIT_BALL_VOLUME,
    Ball,
    CartesianGrid,
    NearlySpherical,
    fraenkel_asymmetry,
    rescale_to_unit_volume,
    volume,
)
from .hartree import SolverConfig, solve_ground_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DescentOptions:
    """Settings of :func:`shape_descent`.

    ``half_extent`` of the common grid defaults to ``grid_margin`` times the
    largest radius of the unit-volume start shape (at least 1.25).
    ``bias_correction`` subtracts the finite-difference gradient of the ball,
    which is nonzero only because the grid is not rotation invariant.
    The descent also stops once an accepted step lowers E by less than
    ``energy_rtol`` relative, since further gradients then only resolve
    discretization noise.
    """

    l_max: int = 4
    tol: float = 1e-4
    fd_step: float = 1e-3
    max_iter: int = 12
    grid_n: int = 64
    half_extent: Optional[float] = None
    grid_margin: float = 1.2
    initial_step: float = 0.05
    max_halvings: int = 8
    energy_rtol: float = 1e-6
    bias_correction: bool = True
    solver: SolverConfig = SolverConfig(theta=1.0, discretization="cartesian")

    def __post_init__(self):
        if int(self.l_max) != self.l_max or self.l_max < 0:
            raise ValueError("l_max must be a nonnegative integer")
        for name in ("tol", "fd_step", "initial_step", "grid_margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass
class DescentRecord:
    iteration: int
    coeffs: dict
    E: float
    volume: float
    asymmetry: float
    step: float
    grad_norm: float


@dataclass
class DescentTrace:
    records: list = field(default_factory=list)
    grid: Optional[CartesianGrid] = None
    q: float = 0.0
    ball_energy: Optional[float] = None
    terminated: str = ""

    def append(self, rec):
        self.records.append(rec)

    @property
    def energies(self):
        return [r.E for r in self.records]

    def write_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "E", "volume", "asymmetry", "step"])
            for r in self.records:
                w.writerow([r.iteration, repr(r.E), repr(r.volume), repr(r.asymmetry), repr(r.step)])


def design_modes(l_max):
    return [(l, m) for l in range(2, l_max + 1) for m in range(-l, l + 1)]


class _Evaluator:
    """E_q of unit-volume rescalings on a fixed grid, with warm starts."""

    def __init__(self, fixed, modes, q, grid, cfg):
        self.fixed = fixed
        self.modes = modes
        self.q = q
        self.grid = grid
        self.cfg = cfg
        self.warm = None
        self.count = 0

    def shape(self, c):
        coeffs = dict(self.fixed)
        coeffs.update({k: float(v) for k, v in zip(self.modes, c) if v != 0.0})
        d, _ = rescale_to_unit_volume(NearlySpherical(1.0, coeffs))
        return d

    def solve(self, c, warm=None):
        d = self.shape(c)
        init = self.warm if warm is None else warm
        self.count += 1
        return d, solve_ground_state(d, self.q, self.cfg, grid=self.grid, initial=init)

    def energy(self, c):
        return self.solve(c)[1].E

    def gradient(self, c, h):
        g = np.zeros(len(c))
        for k in range(len(c)):
            e = np.zeros(len(c))
            e[k] = h
            g[k] = (self.energy(c + e) - self.energy(c - e)) / (2.0 * h)
        return g


def _common_grid(start, opts):
    if opts.half_extent is not None:
        return CartesianGrid(opts.half_extent, opts.grid_n)
    d, _ = rescale_to_unit_volume(start)
    R = max(1.25, opts.grid_margin * d.bounding_radius())
    return CartesianGrid(R / (1.0 - 5.0 / opts.grid_n), opts.grid_n)


def shape_descent(start, q, opts=DescentOptions(), log_every=True):
    """Finite-difference gradient descent of E_q over unit-volume nearly spherical sets.

    Each iteration takes a central-difference gradient, then a backtracking
    line search along its negative with a parabolic refinement.  A step is
    accepted only if it lowers the discrete energy.  Returns the final
    unit-volume shape and the trace.
    """
    if not isinstance(start, NearlySpherical):
        raise TypeError("shape descent starts from a nearly spherical set")
    if q < 0:
        raise ValueError("charge q must be nonnegative")
    t0 = time.perf_counter()
    modes = design_modes(opts.l_max)
    start_coeffs = {k: v for k, v in start.coeff_dict.items()}
    # the base radius only sets the scale, which is removed by rescaling
    fixed = {k: v for k, v in start_coeffs.items() if k[0] in (1,) or k[0] > opts.l_max}
    c = np.array([start_coeffs.get(k, 0.0) for k in modes])
    grid = _common_grid(start, opts)
    ev = _Evaluator(fixed, modes, q, grid, opts.solver)
    trace = DescentTrace(grid=grid, q=float(q))

    try:
        ball_gs = solve_ground_state(Ball(1.0), q, opts.solver, grid=grid)
    except NumericalFailure as exc:
        raise DescentError(f"ball reference solve failed: {exc}", trace) from exc
    trace.ball_energy = ball_gs.E
    bias = np.zeros(len(modes))
    if opts.bias_correction and modes and not fixed:
        ev.warm = ball_gs.u
        bias = ev.gradient(np.zeros(len(modes)), opts.fd_step)
        log.info("lattice bias gradient norm %.3g", np.linalg.norm(bias))

    def objective(E, c):
        return E - float(bias @ c)

    try:
        d, gs = ev.solve(c, warm=ball_gs.u)
    except (NumericalFailure, InvalidDomainError) as exc:
        raise DescentError(f"start shape could not be solved: {exc}", trace) from exc
    ev.warm = gs.u
    E = gs.E
    obj = objective(E, c)

    def record(it, step, gnorm):
        trace.append(DescentRecord(it, ev.shape(c).coeff_dict, E, volume(d), fraenkel_asymmetry(d), step, gnorm))
        rec = trace.records[-1]
        if log_every:
            log.info("descent %d: E=%.10f asym=%.4g step=%.3g |g|=%.3g", it, rec.E, rec.asymmetry, step, gnorm)

    alpha = None
    for it in range(opts.max_iter + 1):
        if not modes:
            record(it, 0.0, 0.0)
            trace.terminated = "no design modes"
            break
        try:
            g = ev.gradient(c, opts.fd_step) - bias
        except NumericalFailure as exc:
            raise DescentError(f"gradient evaluation failed: {exc}", trace) from exc
        gnorm = float(np.linalg.norm(g))
        if it == 0:
            record(0, 0.0, gnorm)
        else:
            trace.records[-1].grad_norm = gnorm
        if gnorm <= opts.tol:
            trace.terminated = "gradient tolerance"
            break
        if it == opts.max_iter:
            trace.terminated = "iteration limit"
            break
        p = -g
        slope = -gnorm**2
        if alpha is None:
            alpha = opts.initial_step / float(np.max(np.abs(g)))
        best = None
        a = alpha
        failures = 0
        for _ in range(opts.max_halvings + 1):
            try:
                dt, gt = ev.solve(c + a * p)
            except (NumericalFailure, InvalidDomainError) as exc:
                log.info("trial step %.3g failed (%s); halving", a, exc)
                failures += 1
                a *= 0.5
                continue
            ot = objective(gt.E, c + a * p)
            if ot <= obj + 1e-4 * a * slope and gt.E <= E:
                best = (a, dt, gt, ot)
                break
            # parabola through obj, slope and ot; try its vertex if it lies inside
            curv = ot - obj - a * slope
            a = min(0.5 * a, -slope * a * a / (2.0 * curv)) if curv > 0 else 0.5 * a
        if best is None:
            if failures > opts.max_halvings:
                raise DescentError("every trial step failed to solve", trace)
            trace.terminated = "line search stalled"
            break
        a, dt, gt, ot = best
        curv = ot - obj - a * slope
        if curv > 0:
            a_star = -slope * a * a / (2.0 * curv)
            if 1.2 * a < a_star < 4.0 * a or a_star < 0.8 * a:
                try:
                    ds, gs_s = ev.solve(c + a_star * p, warm=gt.u)
                    os_ = objective(gs_s.E, c + a_star * p)
                    if os_ < ot and gs_s.E <= gt.E:
                        a, dt, gt, ot = a_star, ds, gs_s, os_
                except (NumericalFailure, InvalidDomainError):
                    pass
        step_vec = a * p
        c = c + step_vec
        decrease = E - gt.E
        d, gs, E, obj = dt, gt, gt.E, ot
        ev.warm = gs.u
        alpha = 2.0 * a
        record(it + 1, float(np.linalg.norm(step_vec)), float("nan"))
        if decrease < opts.energy_rtol * abs(E):
            trace.terminated = "energy decrease below tolerance"
            break
    log.info("descent finished (%s) after %d solves in %.1fs", trace.terminated, ev.count, time.perf_counter() - t0)
    return ev.shape(c), trace


@lru_cache(maxsize=16)
def _ball_eigenvalue(grid, cfg):
    return solve_ground_state(Ball(1.0), 0.0, cfg, grid=grid).lambda_q


def fk_deficit(d, n=48, cfg=None):
    """Scale-invariant eigenvalue deficit |d|^{2/3} λ_0(d) - |B_1|^{2/3} λ_0(B_1).

    The set is rescaled to unit volume and compared with the unit ball on the
    same Cartesian grid, so the lattice error largely cancels.
    """
    cfg = cfg or SolverConfig(theta=1.0, discretization="cartesian")
    unit, _ = rescale_to_unit_volume(d)
    R = max(1.25, 1.2 * unit.bounding_radius()) if not isinstance(unit, Ball) else 1.25
    grid = CartesianGrid(R / (1.0 - 5.0 / n), n)
    if isinstance(unit, Ball):
        unit = Ball(unit.radius)
    lam = solve_ground_state(unit, 0.0, cfg, grid=grid).lambda_q
    lam_ball = _ball_eigenvalue(grid, cfg)
    scale = UNIT_BALL_VOLUME ** (2.0 / 3.0)
    return {"deficit": scale * (lam - lam_ball), "asymmetry": fraenkel_asymmetry(d)}


MIN_BOUNDARY_SAMPLES = 16


def boundary_gradient_statistics(gs, d, min_alignment=0.5):
    """Mean and relative spread of |grad u| on the boundary.

    Along every grid edge that crosses the boundary at a steep enough angle
    (|n . e| >= ``min_alignment``) a quadratic vanishing at the crossing is
    fitted through the two support values behind it; its slope divided by
    n . e estimates |grad u| at the crossing point.
    """
    u = gs.u
    if u.is_radial or u.edge_lengths is None:
        raise DiagnosticsError("boundary statistics need a Cartesian ground state with cut-cell geometry")
    grid = u.grid
    h = grid.h
    pts = grid.points
    vals, mask = u.values, u.support_mask
    samples = []
    for k, (axis, sign) in enumerate(DIRECTIONS):
        ahead = np.roll(mask, -sign, axis=axis)
        behind_vals = np.roll(vals, sign, axis=axis)
        behind_in = np.roll(mask, sign, axis=axis)
        cut = mask & ~ahead & behind_in
        if not cut.any():
            continue
        dist = u.edge_lengths[k][cut]
        e = np.zeros(3)
        e[axis] = sign
        xb = pts[cut] + dist[:, None] * e
        align = d.outward_normal(xb) @ e
        ok = align >= min_alignment
        s1, s2 = dist[ok], dist[ok] + h
        u1, u2 = vals[cut][ok], behind_vals[cut][ok]
        # p(s) = a s + b s^2 through (s1, u1) and (s2, u2)
        slope = (u1 * s2**2 - u2 * s1**2) / (s1 * s2 * (s2 - s1))
        samples.append(slope / align[ok])
    g = np.concatenate(samples) if samples else np.zeros(0)
    if g.size < MIN_BOUNDARY_SAMPLES:
        raise DiagnosticsError(f"only {g.size} boundary samples; refine the grid")
    mean = float(np.mean(g))
    return {"mean": mean, "rel_stddev": float(np.std(g) / mean), "samples": int(g.size)}
