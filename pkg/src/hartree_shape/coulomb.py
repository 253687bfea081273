"""Newtonian potential v = rho * 1/|x| and the Coulomb form D(phi, psi)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import fft

from .fields import ScalarField, weights
from .geometry import CartesianGrid, RadialGrid

# integral of 1/|x| over the unit cube centred at the origin
CUBE_SELF_POTENTIAL = 3.0 * (np.log(2.0 + np.sqrt(3.0)) - np.pi / 6.0)


@dataclass(frozen=True, eq=False)
class Potential:
    grid: Union[RadialGrid, CartesianGrid]
    values: np.ndarray = field(repr=False)


def radial_potential(grid, rho):
    """v(r_i) = sum_j W_j rho_j / max(r_i, r_j) with the trapezoidal volume weights W.

    This is Newton's shell formula 4*pi [ (1/r) int_0^r s^2 rho + int_r^R s rho ]
    with a kernel that is symmetric in (i, j) by construction.
    """
    r = grid.r
    a = grid.weights * rho
    inner = np.cumsum(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(r > 0, a / r, 0.0)
        inside = np.where(r > 0, inner / r, 0.0)
    outer = np.concatenate([np.cumsum(tail[::-1])[::-1][1:], [0.0]])
    return inside + outer


@lru_cache(maxsize=8)
def _kernel_hat(n, h):
    """FFT of the cell-averaged Coulomb kernel on the doubled (2n)^3 box."""
    k = np.arange(2 * n)
    k = np.where(k <= n, k, k - 2 * n).astype(float)
    d2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    with np.errstate(divide="ignore"):
        g = h * h / np.sqrt(d2)
    g[0, 0, 0] = h * h * CUBE_SELF_POTENTIAL
    return fft.rfftn(g)


def cartesian_potential(grid, rho):
    """Free-space convolution of cell values ``rho`` with 1/|x| via zero-padded FFT.

    Off-diagonal cells use the point kernel h^3/|x_i - x_j|, the self cell the
    exact cube average.  The result equals :func:`direct_sum_potential` up to
    rounding.
    """
    n = grid.n
    khat = _kernel_hat(n, grid.h)
    out = fft.irfftn(fft.rfftn(rho, s=(2 * n,) * 3) * khat, s=(2 * n,) * 3)
    return out[:n, :n, :n]


def direct_sum_potential(grid, rho, chunk=2048):
    """O(N^2) reference for :func:`cartesian_potential` (use only on small grids)."""
    pts = grid.points.reshape(-1, 3)
    src = rho.ravel()
    nz = np.flatnonzero(src)
    sp, sv = pts[nz], src[nz]
    h = grid.h
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk]
        dist = np.sqrt(((p[:, None, :] - sp[None, :, :]) ** 2).sum(-1))
        with np.errstate(divide="ignore"):
            kern = np.where(dist > 0.5 * h, h**3 / dist, h * h * CUBE_SELF_POTENTIAL)
        out[start : start + chunk] = kern @ sv
    return out.reshape(grid.shape)


def potential(source_density):
    """Potential of a (nonnegative) density field."""
    g = source_density.grid
    if isinstance(g, RadialGrid):
        v = radial_potential(g, source_density.values)
    else:
        v = cartesian_potential(g, source_density.values)
    return Potential(g, v)


def bilinear_D(phi, psi):
    """D(phi, psi) = int int phi(x) psi(y) / |x - y| = int phi * potential(psi)."""
    if phi.grid != psi.grid:
        raise ValueError("D requires both fields on the same grid")
    v = potential(psi).values
    return float(np.sum(weights(phi.grid) * phi.values * v))


def density(u):
    """The field u^2 with the support of u."""
    return ScalarField(u.grid, u.values**2, u.support_mask, u.edge_lengths)


def self_energy(u):
    """D(u^2, u^2)."""
    rho = density(u)
    return bilinear_D(rho, rho)
