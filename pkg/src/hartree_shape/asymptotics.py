"""Large-charge bounds: union-of-balls competitors against the unit ball."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .coulomb import self_energy
from .fields import ScalarField
from .geometry import RadialGrid

log = logging.getLogger(__name__)

LAMBDA0_B1 = math.pi**2


def unit_ball_eigenfunction(grid):
    """w_B(r) = sin(pi r) / (r sqrt(2 pi)), the normalized first Dirichlet mode of B_1."""
    return ScalarField.on_radial(
        grid, lambda r: np.pi * np.sinc(r) / np.sqrt(2.0 * np.pi), support_radius=1.0
    )


@lru_cache(maxsize=1)
def coulomb_constant(n=4097):
    """D(w_B^2, w_B^2) on a fine radial grid."""
    Dw = self_energy(unit_ball_eigenfunction(RadialGrid(1.0, n)))
    log.info("D(w_B^2, w_B^2) = %.10f (radial n=%d)", Dw, n)
    return Dw


def separation_correction(q, N, separations):
    """Cross-ball Coulomb energy (q/N^2) sum_{i<j} 1/|x_i - x_j| for equal balls of mass 1/N.

    Exact for disjoint radial charge clouds (Newton's theorem).
    """
    seps = np.asarray(separations, dtype=float).ravel()
    if seps.size == 0:
        return 0.0
    return float(q / N**2 * np.sum(1.0 / seps))


def competitor_upper_bound(N, q, separations=None):
    """U(N, q) = λ_0(B_1) N^{2/3} + (q/2) D_w N^{-2/3} for N equal balls with N r^3 = 1."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    if q < 0:
        raise ValueError("q must be nonnegative")
    U = LAMBDA0_B1 * N ** (2.0 / 3.0) + 0.5 * q * coulomb_constant() * N ** (-2.0 / 3.0)
    if separations is not None:
        U += separation_correction(q, N, separations)
    return float(U)


def real_argmin(q):
    """Minimizer over real N > 0 of U(N, q): (q D_w / (2 pi^2))^{3/4}."""
    return (q * coulomb_constant() / (2.0 * LAMBDA0_B1)) ** 0.75


@dataclass(frozen=True)
class Competitor:
    N_star: int
    energy: float
    N_real: float


def optimal_competitor(q):
    if not q > 0:
        raise ValueError("q must be positive")
    Nr = real_argmin(q)
    candidates = {max(1, math.floor(Nr)), max(1, math.ceil(Nr))}
    best = min(candidates, key=lambda N: competitor_upper_bound(N, q))
    return Competitor(best, competitor_upper_bound(best, q), Nr)


def continuum_bound(q):
    """2 sqrt(λ_0 (q/2) D_w) = min over real N of U(N, q)."""
    return 2.0 * math.sqrt(LAMBDA0_B1 * 0.5 * q * coulomb_constant())


def ball_lower_bound(q):
    """E_q(B_1) >= q/4 for q >= 1 (diameter 2 bounds the Coulomb kernel below)."""
    if q < 1:
        raise ValueError("the ball lower bound is stated for q >= 1")
    return q / 4.0


def diameter_lower_bound(q, E):
    """diam >= q / (2 E) for a set of energy E."""
    if not E > 0:
        raise ValueError("E must be positive")
    return q / (2.0 * E)


def crossing_charge(q_hi=1e7):
    """Smallest q with min_N U(N, q) < q/4 (the gap is convex in q, so it is unique)."""

    def gap(q):
        return q / 4.0 - optimal_competitor(q).energy

    lo, hi = 1.0, 2.0
    while gap(hi) <= 0:
        lo, hi = hi, hi * 2
        if hi > q_hi:
            raise RuntimeError("no crossing below q_hi")
    return brentq(gap, lo, hi, xtol=1e-12, rtol=1e-14)


def loglog_slope(qs, values):
    slope, _ = np.polyfit(np.log(qs), np.log(values), 1)
    return float(slope)
