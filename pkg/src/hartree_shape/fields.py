"""Discretized scalar functions on radial or Cartesian grids.

Radial fields hold u(r_i) of a radially symmetric function.  Cartesian fields
hold cell-centre values; their boundary geometry is carried by ``edge_lengths``:
for every support node and each of the six axis directions, the distance to
the point where the field is pinned to zero.  That distance is the grid
spacing when the neighbour is outside the support (staircase boundary) or the
exact boundary crossing when the field was built from an analytic domain.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .geometry import CartesianGrid, RadialGrid

# (axis, sign) for the six edge directions, in the order of edge_lengths
DIRECTIONS = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))
MIN_CUT_FRACTION = 1e-4


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Union[RadialGrid, CartesianGrid]
    values: np.ndarray = field(repr=False)
    support_mask: np.ndarray = field(repr=False)
    edge_lengths: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        mask = np.array(self.support_mask, dtype=bool)
        if vals.shape != self.grid.shape or mask.shape != self.grid.shape:
            raise ValueError("values and support_mask must match the grid shape")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if np.any(vals[~mask] != 0.0):
            raise ValueError("field must vanish outside its support mask")
        vals.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support_mask", mask)
        if self.edge_lengths is not None:
            if not isinstance(self.grid, CartesianGrid):
                raise ValueError("edge_lengths only apply to Cartesian fields")
            el = np.array(self.edge_lengths, dtype=float)
            if el.shape != (6,) + self.grid.shape:
                raise ValueError("edge_lengths must have shape (6, n, n, n)")
            el.setflags(write=False)
            object.__setattr__(self, "edge_lengths", el)

    @property
    def is_radial(self):
        return isinstance(self.grid, RadialGrid)

    def with_values(self, values):
        """Same grid, support and boundary geometry, new values."""
        values = np.where(self.support_mask, values, 0.0)
        return ScalarField(self.grid, values, self.support_mask, self.edge_lengths)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape, dtype=bool))

    @classmethod
    def on_radial(cls, grid, func, support_radius=None):
        """Sample ``func(r)`` on ``grid``; support is r < support_radius (default: all nodes)."""
        r = grid.r
        mask = np.ones(grid.n, dtype=bool) if support_radius is None else r < support_radius
        vals = np.where(mask, func(r), 0.0)
        return cls(grid, vals, mask)

    @classmethod
    def on_cartesian(cls, grid, func, mask, edge_lengths=None):
        vals = np.where(mask, func(grid.points), 0.0)
        return cls(grid, vals, mask, edge_lengths)


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    coulomb: float
    l2norm_sq: float

    def __post_init__(self):
        for name in ("dirichlet", "coulomb", "l2norm_sq"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def total_Eq(self, q):
        return self.dirichlet + 0.5 * q * self.coulomb


# --------------------------------------------------------------------------
# quadrature


def weights(grid):
    """Quadrature weights: trapezoidal in r (radial) or midpoint cells (Cartesian)."""
    if isinstance(grid, RadialGrid):
        return grid.weights
    return np.full(grid.shape, grid.cell_volume)


def integrate(u, values=None):
    """Quadrature of ``values`` (default: the field itself) over the grid."""
    f = u.values if values is None else values
    return float(np.sum(weights(u.grid) * f))


def l2_norm_sq(u):
    return integrate(u, u.values**2)


def normalize(u):
    n2 = l2_norm_sq(u)
    if not n2 > 0:
        raise ValueError("cannot normalize a zero field")
    return u * (1.0 / np.sqrt(n2))


def _shifted(a, axis, sign, fill=0.0):
    """b[i] = a[i + sign] along ``axis``; out-of-range entries take ``fill``."""
    b = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if sign > 0:
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
    else:
        src[axis], dst[axis] = slice(None, -1), slice(1, None)
    b[tuple(dst)] = a[tuple(src)]
    return b


def dirichlet_energy(u):
    """Integral of |grad u|^2.

    Radial: 4*pi * int (u')^2 r^2 dr evaluated through w = sqrt(4*pi) r u,
    int (w')^2 dr - w(r_max)^2 / r_max, with forward differences of w.
    Cartesian: sum over grid edges of the squared edge difference; edges that
    leave the support use the one-sided difference u_i / d to the boundary.
    """
    if u.is_radial:
        g = u.grid
        w = np.sqrt(4.0 * np.pi) * g.r * u.values
        return float(np.sum(np.diff(w) ** 2) / g.h - w[-1] ** 2 / g.r_max)
    g = u.grid
    h = g.h
    vals, mask = u.values, u.support_mask
    total = 0.0
    for k, (axis, sign) in enumerate(DIRECTIONS):
        nb_in = _shifted(mask, axis, sign, False)
        nb_val = _shifted(vals, axis, sign)
        interior = mask & nb_in
        total += 0.5 * h * np.sum((vals[interior] - nb_val[interior]) ** 2)
        cut = mask & ~nb_in
        d = h if u.edge_lengths is None else u.edge_lengths[k][cut]
        total += h * h * np.sum(vals[cut] ** 2 / d)
    return float(total)


def support_volume(u, threshold=0.0):
    """Measure of {u > threshold}.

    Radial: each run of positive nodes extends to the bracketing zero nodes.
    Cartesian: number of positive cells times the cell volume.
    """
    pos = u.values > threshold
    if not u.is_radial:
        return float(pos.sum() * u.grid.cell_volume)
    r = u.grid.r
    total = 0.0
    idx = np.flatnonzero(np.diff(np.concatenate([[0], pos.astype(int), [0]])))
    for start, stop in zip(idx[::2], idx[1::2]):
        ra = 0.0 if start == 0 else r[start - 1]
        rb = r[-1] if stop >= len(r) else r[stop]
        total += 4.0 * np.pi * (rb**3 - ra**3) / 3.0
    return float(total)


# --------------------------------------------------------------------------
# dilation


def dilate(u, rho, onto=None):
    """Mass-preserving dilation u_rho(y) = rho^{-3/2} u(y / rho).

    Without ``onto`` the grid itself is scaled by rho and node values are
    rescaled exactly.  With ``onto`` the result is resampled on that grid:
    cubic splines along r for radial fields, trilinear for Cartesian ones.
    """
    if not rho > 0:
        raise ValueError("dilation factor must be positive")
    amp = rho**-1.5
    g = u.grid.scaled(rho)
    el = None if u.edge_lengths is None else u.edge_lengths * rho
    scaled = ScalarField(g, u.values * amp, u.support_mask, el)
    if onto is None:
        return scaled
    return resample(scaled, onto)


def resample(u, grid):
    """Interpolate ``u`` onto another grid of the same kind."""
    if u.is_radial:
        if not isinstance(grid, RadialGrid):
            raise TypeError("radial fields resample onto radial grids")
        r_src = u.grid.r
        supp = r_src[u.support_mask]
        r_end = r_src[min(np.flatnonzero(u.support_mask).max() + 1, len(r_src) - 1)] if supp.size else 0.0
        spline = CubicSpline(r_src, u.values, bc_type=((1, 0.0), "not-a-knot"))
        r = grid.r
        mask = (r < r_end) & (r <= u.grid.r_max)
        vals = np.where(mask, spline(np.minimum(r, u.grid.r_max)), 0.0)
        return ScalarField(grid, vals, mask)
    if not isinstance(grid, CartesianGrid):
        raise TypeError("Cartesian fields resample onto Cartesian grids")
    a = u.grid.axis
    interp = RegularGridInterpolator((a, a, a), u.values, bounds_error=False, fill_value=0.0)
    vals = interp(grid.points.reshape(-1, 3)).reshape(grid.shape)
    mask = vals != 0.0
    return ScalarField(grid, vals, mask)


# --------------------------------------------------------------------------
# Cartesian boundary geometry


def cut_cell_geometry(domain, grid):
    """Support mask and edge lengths of ``domain`` on ``grid``.

    Domains with an analytic boundary (``exit_distance``) get exact crossing
    distances along grid lines; grid masks get the staircase value h.
    """
    pts = grid.points
    h = grid.h
    if hasattr(domain, "indicator") and getattr(domain, "grid", None) == grid:
        mask = np.array(domain.indicator)
    else:
        mask = np.asarray(domain.contains(pts))
    if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any() or mask[:, :, 0].any() or mask[:, :, -1].any():
        raise ValueError("domain touches the grid boundary; enlarge the grid")
    edges = np.full((6,) + grid.shape, h)
    exit_distance = getattr(domain, "exit_distance", None)
    for k, (axis, sign) in enumerate(DIRECTIONS):
        cut = mask & ~_shifted(mask, axis, sign, False)
        if exit_distance is None or not cut.any():
            continue
        p = pts[cut]
        e = np.zeros((len(p), 3))
        e[:, axis] = sign
        try:
            d = exit_distance(p, e, hmax=h)
        except TypeError:
            d = exit_distance(p, e)
        edges[k][cut] = np.clip(d, MIN_CUT_FRACTION * h, h)
    return mask, edges


# --------------------------------------------------------------------------
# CSV dumps


def write_csv(u, path):
    """Write ``r,value`` (radial) or ``index,value`` (Cartesian, C-order flat index)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if u.is_radial:
            writer.writerow(["r", "value"])
            for r, v in zip(u.grid.r, u.values):
                writer.writerow([repr(float(r)), repr(float(v))])
        else:
            writer.writerow(["index", "value"])
            for i, v in enumerate(u.values.ravel()):
                writer.writerow([i, repr(float(v))])


def read_csv(path, grid):
    """Inverse of :func:`write_csv` on a known grid; support is the nonzero set."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    vals = np.array([float(row[1]) for row in rows[1:]]).reshape(grid.shape)
    return ScalarField(grid, vals, vals != 0.0)
