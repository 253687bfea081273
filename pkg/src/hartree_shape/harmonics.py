"""Real spherical harmonics and product quadrature on the unit sphere."""

from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y


def real_sph_harm(l, m, polar, azimuth):
    """Orthonormal real spherical harmonic Y_lm (no Condon-Shortley phase).

    m > 0 selects the cos(m*azimuth) branch, m < 0 the sin(|m|*azimuth) branch.
    """
    if abs(m) > l:
        raise ValueError(f"|m| must not exceed l (got l={l}, m={m})")
    y = sph_harm_y(l, abs(m), polar, azimuth)
    if m == 0:
        return y.real
    sign = (-1.0) ** m
    if m > 0:
        return np.sqrt(2.0) * sign * y.real
    return np.sqrt(2.0) * sign * y.imag


def directions_to_angles(w):
    """Unit vectors (..., 3) -> (polar, azimuth)."""
    polar = np.arccos(np.clip(w[..., 2], -1.0, 1.0))
    azimuth = np.arctan2(w[..., 1], w[..., 0])
    return polar, azimuth


def expand(coeffs, w):
    """Evaluate sum_{(l,m)} c_lm Y_lm at unit directions ``w`` of shape (..., 3)."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1])
    if not coeffs:
        return out
    polar, azimuth = directions_to_angles(w)
    for (l, m), c in coeffs.items():
        if c != 0.0:
            out += c * real_sph_harm(l, m, polar, azimuth)
    return out


@lru_cache(maxsize=16)
def sphere_quadrature(n_polar=24, n_azimuth=48):
    """Gauss-Legendre (in cos theta) x uniform (in phi) rule on the unit sphere.

    Exact for spherical polynomials of degree < min(2*n_polar, n_azimuth).
    The default has 1152 nodes (144 per octant).

    Returns ``(directions, weights)`` with directions of shape (N, 3).
    """
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * (2.0 * np.pi / n_azimuth)
    ct, ph = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1.0 - ct**2)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    weights = np.repeat(wx, n_azimuth) * (2.0 * np.pi / n_azimuth)
    dirs.setflags(write=False)
    weights.setflags(write=False)
    return dirs, weights


def quadrature_for_degree(degree):
    """Smallest default-or-larger product rule exact for the given polynomial degree."""
    n_polar = max(24, degree // 2 + 2)
    n_azimuth = max(48, degree + 2)
    return sphere_quadrature(n_polar, n_azimuth)
