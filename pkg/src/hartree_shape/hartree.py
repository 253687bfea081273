"""Constrained Hartree ground states.

    E_q(Omega) = min { int |grad u|^2 + (q/2) D(u^2, u^2) : u in H^1_0(Omega), int u^2 = 1 }

The minimizer solves -Δu + q v_u u = λ_q u with λ_q = int |grad u|^2 + q D(u^2, u^2).
Both discretizations are written in orthonormal coordinates y = sqrt(W) u (W the
quadrature weights), so that the discrete problem is a symmetric eigenproblem
K y + q diag(v) y = λ y with |y| = ||u||_{L^2}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.ndimage import label
from scipy.sparse.linalg import cg, lobpcg

from . import coulomb
from .errors import NumericalFailure
from .fields import DIRECTIONS, EnergyBreakdown, ScalarField, _shifted, cut_cell_geometry
from .fields import dirichlet_energy, l2_norm_sq
from .geometry import (
    Ball,
    BallUnion,
    CartesianGrid,
    GridMask,
    NearlySpherical,
    RadialGrid,
    shape_to_dict,
    volume,
)

log = logging.getLogger(__name__)

# energy changes below this relative size are treated as rounding noise
ENERGY_ROUNDOFF = 1e-11
# cap of the adaptive gradient-flow step
MAX_FLOW_STEP = 10.0


@dataclass(frozen=True)
class SolverConfig:
    """Iteration and discretization settings.

    ``discretization`` is "auto" (radial for balls, Cartesian otherwise),
    "radial" or "cartesian".  ``method`` "gradient_flow" skips the SCF
    iteration and runs only the fallback flow, whose step starts at ``tau``
    and adapts to the energy.
    """

    tol_state: float = 1e-8
    tol_lambda: float = 1e-9
    theta: float = 0.5
    max_iter: int = 500
    tau: float = 1e-3
    tol_residual: float = 1e-7
    min_theta: float = 1.0 / 64
    discretization: str = "auto"
    radial_n: int = 2049
    cartesian_n: int = 48
    grid_margin: float = 1.15
    eig_tol: float = 1e-9
    method: str = "scf"

    def __post_init__(self):
        for name in ("tol_state", "tol_lambda", "theta", "max_iter", "tau", "tol_residual"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SolverConfig.{name} must be positive")
        if self.theta > 1:
            raise ValueError("SolverConfig.theta must not exceed 1")
        if self.discretization not in ("auto", "radial", "cartesian"):
            raise ValueError(f"unknown discretization {self.discretization!r}")
        if self.method not in ("scf", "gradient_flow"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True, eq=False)
class GroundState:
    u: ScalarField
    lambda_q: float
    breakdown: EnergyBreakdown
    iterations: int
    residual: float
    q: float
    domain: object = field(repr=False)
    potential: np.ndarray = field(repr=False)
    connected: bool = True
    residual_history: tuple = field(default=(), repr=False)
    method: str = "scf"

    @property
    def E(self):
        return self.breakdown.total_Eq(self.q)

    @property
    def unique(self):
        """On connected domains the minimizer is unique (hidden convexity)."""
        return self.connected


# --------------------------------------------------------------------------
# discrete problems


class RadialProblem:
    """Ball of radius a on a radial grid with r_max = a; unknowns are interior nodes."""

    def __init__(self, radius, n):
        self.grid = RadialGrid(radius, n)
        h = self.grid.h
        self.idx = np.arange(1, n - 1)
        self.sqrt_w = np.sqrt(self.grid.weights[self.idx])
        m = len(self.idx)
        self.diag = np.full(m, 2.0 / h**2)
        self.off = np.full(m - 1, -1.0 / h**2)

    @property
    def size(self):
        return len(self.idx)

    def apply_K(self, y):
        out = self.diag * y
        out[:-1] += self.off * y[1:]
        out[1:] += self.off * y[:-1]
        return out

    def lowest(self, vpot, y0=None):
        lam, vec = eigh_tridiagonal(self.diag + vpot, self.off, select="i", select_range=(0, 0))
        return float(lam[0]), vec[:, 0]

    def full_values(self, y):
        vals = np.zeros(self.grid.n)
        vals[self.idx] = y / self.sqrt_w
        vals[0] = (4.0 * vals[1] - vals[2]) / 3.0
        return vals

    def potential(self, y):
        rho = self.full_values(y) ** 2
        return coulomb.radial_potential(self.grid, rho)[self.idx]

    def to_field(self, y):
        g = self.grid
        return ScalarField(g, self.full_values(y), g.r < g.r_max)

    def from_field(self, u):
        if u.grid != self.grid:
            raise ValueError("initial field is on a different grid")
        return u.values[self.idx] * self.sqrt_w

    def shifted_solve(self, tau, rhs, vpot):
        """Solve (I + tau (K + diag(vpot))) x = rhs."""
        ab = np.vstack([np.r_[0.0, tau * self.off], 1.0 + tau * (self.diag + vpot), np.r_[tau * self.off, 0.0]])
        return solve_banded((1, 1), ab, rhs)


class CartesianProblem:
    """Cut-cell discretization on a Cartesian grid; unknowns are support nodes."""

    def __init__(self, grid, mask, edges):
        self.grid = grid
        self.mask = mask
        self.edges = edges
        h = grid.h
        index = -np.ones(grid.shape, dtype=np.int64)
        index[mask] = np.arange(mask.sum())
        self.index = index
        m = int(mask.sum())
        diag = np.zeros(m)
        rows, cols = [], []
        for k, (axis, sign) in enumerate(DIRECTIONS):
            nb_in = _shifted(mask, axis, sign, False)
            nb_idx = _shifted(index, axis, sign, -1)
            inner = mask & nb_in
            i = index[inner]
            rows.append(i)
            cols.append(nb_idx[inner])
            diag[i] += 1.0 / h**2
            cut = mask & ~nb_in
            diag[index[cut]] += 1.0 / (h * edges[k][cut])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        off = sp.csr_matrix((np.full(len(rows), -1.0 / h**2), (rows, cols)), shape=(m, m))
        self.K = (off + sp.diags(diag)).tocsr()
        self.scale = h**1.5
        self._amg = None
        self._shifted = {}

    @property
    def size(self):
        return self.K.shape[0]

    @property
    def amg(self):
        if self._amg is None:
            self._amg = pyamg.smoothed_aggregation_solver(self.K).aspreconditioner()
        return self._amg

    def apply_K(self, y):
        return self.K @ y

    def lowest(self, vpot, y0=None, tol=1e-9):
        H = self.K + sp.diags(vpot) if np.any(vpot) else self.K
        if y0 is None:
            pts = self.grid.points[self.mask]
            c = pts.mean(axis=0)
            y0 = np.exp(-np.sum((pts - c) ** 2, axis=1))
        X = np.asarray(y0, dtype=float).reshape(-1, 1)
        lam, vec = lobpcg(H, X, M=self.amg, largest=False, tol=tol, maxiter=400)
        return float(lam[0]), vec[:, 0]

    def full_values(self, y):
        vals = np.zeros(self.grid.shape)
        vals[self.mask] = y / self.scale
        return vals

    def potential(self, y):
        rho = self.full_values(y) ** 2
        return coulomb.cartesian_potential(self.grid, rho)[self.mask]

    def to_field(self, y):
        return ScalarField(self.grid, self.full_values(y), self.mask, self.edges)

    def from_field(self, u):
        if u.grid != self.grid:
            raise ValueError("initial field is on a different grid")
        return u.values[self.mask] * self.scale

    def shifted_solve(self, tau, rhs, vpot):
        """Solve (I + tau (K + diag(vpot))) x = rhs, preconditioned by AMG on I + tau K."""
        if tau not in self._shifted:
            A0 = (sp.identity(self.size) + tau * self.K).tocsr()
            self._shifted[tau] = pyamg.smoothed_aggregation_solver(A0).aspreconditioner()
        A = (sp.identity(self.size) + tau * (self.K + sp.diags(vpot))).tocsr()
        x, info = cg(A, rhs, M=self._shifted[tau], rtol=1e-12, maxiter=500)
        return x


def _ball_equivalent(d):
    if isinstance(d, Ball):
        return d
    if isinstance(d, BallUnion) and len(d.balls) == 1:
        return d.balls[0]
    if isinstance(d, NearlySpherical) and d.is_ball():
        return d.as_ball()
    return None


def _is_connected(d):
    if isinstance(d, (Ball, NearlySpherical)):
        return True
    if isinstance(d, BallUnion):
        return len(d.balls) == 1
    if isinstance(d, GridMask):
        return label(d.indicator)[1] == 1
    return False


def cartesian_grid_for(d, n, margin=1.15):
    """Origin-centred grid enclosing ``d`` with a margin of at least two cells."""
    if isinstance(d, GridMask):
        return d.grid
    br = d.bounding_radius()
    R = max(margin * br, br / (1.0 - 5.0 / n))
    return CartesianGrid(R, n)


def build_problem(d, cfg=SolverConfig(), grid=None):
    ball = _ball_equivalent(d)
    mode = cfg.discretization
    if mode == "auto":
        mode = "radial" if ball is not None and grid is None else "cartesian"
    if mode == "radial":
        if ball is None:
            raise ValueError("radial discretization needs a ball")
        if grid is not None and isinstance(grid, RadialGrid):
            return RadialProblem(grid.r_max, grid.n)
        return RadialProblem(ball.radius, cfg.radial_n)
    if grid is None:
        grid = cartesian_grid_for(d, cfg.cartesian_n, cfg.grid_margin)
    mask, edges = cut_cell_geometry(d, grid)
    return CartesianProblem(grid, mask, edges)


# --------------------------------------------------------------------------
# solver


def _energies(problem, y, q):
    v = problem.potential(y)
    Ky = problem.apply_K(y)
    return float(y @ Ky), float(np.sum(y * y * v)), v, Ky


def _normalized(y):
    return y / np.linalg.norm(y)


def _positive(y):
    return np.abs(y if np.sum(y) >= 0 else -y)


def solve_problem(problem, q, cfg=SolverConfig(), y0=None):
    """SCF iteration with damped mixing and a semi-implicit gradient-flow fallback.

    Returns ``(y, info)`` where ``info`` holds the energy breakdown and history.
    """
    if q < 0:
        raise ValueError("charge q must be nonnegative")
    eig_kw = {"tol": cfg.eig_tol} if isinstance(problem, CartesianProblem) else {}
    if y0 is None:
        _, y = problem.lowest(np.zeros(problem.size), **eig_kw)
    else:
        y = np.asarray(y0, dtype=float)
    y = _normalized(_positive(y))

    def state(y):
        dirichlet, coul, v, Ky = _energies(problem, y, q)
        E = dirichlet + 0.5 * q * coul
        lam = dirichlet + q * coul
        res = float(np.linalg.norm(Ky + q * v * y - lam * y))
        return E, lam, dirichlet, coul, v, res

    E, lam, dirichlet, coul, v, res = state(y)
    history = [res]
    theta = cfg.theta
    step = np.inf
    dE = np.inf
    it = 0
    method = "scf"
    stagnated = cfg.method == "gradient_flow"
    while it < cfg.max_iter and not stagnated:
        if res <= cfg.tol_residual and step <= cfg.tol_state and abs(dE) <= cfg.tol_lambda * max(1.0, abs(E)):
            break
        it += 1
        _, y_lin = problem.lowest(q * v, y, **eig_kw)
        y_lin = _normalized(_positive(y_lin))
        t = theta
        while True:
            y_new = _normalized((1.0 - t) * y + t * y_lin)
            new = state(y_new)
            if new[0] <= E + ENERGY_ROUNDOFF * max(1.0, abs(E)):
                break
            t *= 0.5
            if t < cfg.min_theta:
                stagnated = True
                break
        if stagnated:
            break
        if t < theta:
            log.debug("SCF damping reduced to %.4g at iteration %d", t, it)
            theta = t
        step = float(np.linalg.norm(y_new - y))
        dE = new[0] - E
        y = y_new
        E, lam, dirichlet, coul, v, res = new
        history.append(res)
        if it >= 30 and res > 0.5 * history[-30] and res > cfg.tol_residual:
            stagnated = True
            break

    if stagnated:
        method = "gradient_flow"
        if cfg.method == "scf":
            log.info("SCF stagnated at residual %.3g; switching to gradient flow", res)
        tau = cfg.tau
        while it < cfg.max_iter and res > cfg.tol_residual:
            it += 1
            y_new = _normalized(_positive(problem.shifted_solve(tau, y, q * v)))
            new = state(y_new)
            if new[0] <= E + ENERGY_ROUNDOFF * max(1.0, abs(E)):
                y = y_new
                E, lam, dirichlet, coul, v, res = new
                tau = min(2.0 * tau, MAX_FLOW_STEP)
            else:
                tau *= 0.5
                if tau < 1e-3 * cfg.tau:
                    break
            history.append(res)

    converged = res <= cfg.tol_residual
    if not converged:
        raise NumericalFailure(
            f"ground state did not converge after {it} iterations (residual {res:.3g})", history
        )
    info = dict(E=E, lam=lam, dirichlet=dirichlet, coulomb=coul, v=v, residual=res,
                iterations=it, history=tuple(history), method=method)
    return y, info


def solve_ground_state(d, q, cfg=SolverConfig(), grid=None, initial=None, problem=None):
    """Ground state of E_q on domain ``d``.

    ``grid`` forces a particular grid; ``initial`` is a warm-start field on it.
    """
    if q < 0:
        raise ValueError("charge q must be nonnegative")
    volume(d)
    if problem is None:
        problem = build_problem(d, cfg, grid)
    y0 = None if initial is None else problem.from_field(initial)
    y, info = solve_problem(problem, q, cfg, y0)
    u = problem.to_field(y)
    if isinstance(problem, RadialProblem):
        v_full = coulomb.radial_potential(problem.grid, u.values**2)
    else:
        v_full = coulomb.cartesian_potential(problem.grid, u.values**2)
    bd = EnergyBreakdown(info["dirichlet"], max(info["coulomb"], 0.0), float(y @ y))
    return GroundState(
        u=u,
        lambda_q=info["lam"],
        breakdown=bd,
        iterations=info["iterations"],
        residual=info["residual"],
        q=float(q),
        domain=d,
        potential=v_full,
        connected=_is_connected(d),
        residual_history=info["history"],
        method=info["method"],
    )


def energy(d, q, cfg=SolverConfig(), **kw):
    return solve_ground_state(d, q, cfg, **kw).E


def lowest_dirichlet_eigenvalue(d, cfg=SolverConfig(), **kw):
    return solve_ground_state(d, 0.0, cfg, **kw).lambda_q


# --------------------------------------------------------------------------
# diagnostics


def field_energy(u, q):
    """E_q(u) = int |grad u|^2 + (q/2) D(u^2, u^2) for a given field (no constraint)."""
    return dirichlet_energy(u) + 0.5 * q * coulomb.self_energy(u)


def hidden_convexity_profile(u, v, q, ts):
    """g(t) = E_q(sigma_t) with sigma_t = sqrt((1 - t) u^2 + t v^2)."""
    if u.grid != v.grid:
        raise ValueError("fields must share a grid")
    for name, f in (("u", u), ("v", v)):
        if abs(l2_norm_sq(f) - 1.0) > 1e-8:
            raise ValueError(f"{name} must be normalized")
        if np.any(f.values < 0):
            raise ValueError(f"{name} must be nonnegative")
    mask = u.support_mask | v.support_mask
    edges = u.edge_lengths if np.array_equal(u.support_mask, v.support_mask) else None
    out = []
    for t in ts:
        s = np.sqrt((1.0 - t) * u.values**2 + t * v.values**2)
        out.append(field_energy(ScalarField(u.grid, s, mask, edges), q))
    return out


def superharmonicity_check(gs, q=None):
    """min over the support of c(x) = λ_q - q v_u(x); -Δu = c u, so c >= 0 means superharmonic."""
    q = gs.q if q is None else q
    c = gs.lambda_q - q * gs.potential[gs.u.support_mask]
    min_c = float(np.min(c))
    return {"min_c": min_c, "holds": min_c >= -1e-8}


def radial_profile_deviation(gs_cart, gs_radial):
    """Compare a Cartesian ball solution with the radial one.

    Returns the relative RMS deviation of u(x) from u_rad(|x - c|) over the
    support, and the relative energy difference.
    """
    from scipy.interpolate import CubicSpline

    g = gs_radial.u.grid
    spline = CubicSpline(g.r, gs_radial.u.values)
    mask = gs_cart.u.support_mask
    center = np.asarray(getattr(gs_cart.domain, "center", (0.0, 0.0, 0.0)))
    r = np.linalg.norm(gs_cart.u.grid.points[mask] - center, axis=1)
    ref = spline(np.minimum(r, g.r_max))
    dev = gs_cart.u.values[mask] - ref
    return {
        "rel_rms": float(np.sqrt(np.mean(dev**2)) / np.mean(ref)),
        "rel_energy": float(abs(gs_cart.E - gs_radial.E) / gs_radial.E),
    }


def result_dict(gs):
    try:
        dom = shape_to_dict(gs.domain)
    except TypeError:
        dom = type(gs.domain).__name__
    return {
        "q": gs.q,
        "domain": dom,
        "E": gs.E,
        "lambda": gs.lambda_q,
        "dirichlet": gs.breakdown.dirichlet,
        "coulomb": gs.breakdown.coulomb,
        "iters": gs.iterations,
        "residual": gs.residual,
    }
