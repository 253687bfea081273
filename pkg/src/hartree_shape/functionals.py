"""Penalized energies: L^2 penalty, volume penalty and the free-boundary form."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import coulomb
from .fields import dirichlet_energy, l2_norm_sq, support_volume
from .geometry import UNIT_BALL_VOLUME, Ball, volume
from .hartree import SolverConfig, energy

log = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-8


@lru_cache(maxsize=1)
def default_M():
    """10 * E_{0.1}(B_1) rounded up to an integer; fixed once per process."""
    M = float(math.ceil(10.0 * energy(Ball(1.0), 0.1)))
    log.info("penalty M fixed at %g", M)
    return M


@dataclass(frozen=True)
class PenaltyParams:
    M: float
    eta: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")

    @classmethod
    def default(cls, eta=0.05):
        return cls(default_M(), eta)


def f_eta(s, eta):
    """Piecewise linear volume penalty with slope eta below |B_1| and 1/eta above.

    Scalar ``Fraction`` arguments are evaluated in exact rational arithmetic
    (with |B_1| taken as the exact value of its float), which lets the
    two-sided slope bounds be checked without rounding.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if isinstance(s, Fraction):
        if s < 0:
            raise ValueError("volume must be nonnegative")
        B = Fraction(UNIT_BALL_VOLUME)
        eta = Fraction(eta)
        return eta * (s - B) if s <= B else (s - B) / eta
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("volume must be nonnegative")
    out = np.where(s <= UNIT_BALL_VOLUME, eta * (s - UNIT_BALL_VOLUME), (s - UNIT_BALL_VOLUME) / eta)
    return float(out) if out.ndim == 0 else out


def E_q(u, q):
    return dirichlet_energy(u) + 0.5 * q * coulomb.self_energy(u)


def E_qM(u, q, M):
    """E_q(u) + M |int u^2 - 1|."""
    if np.any(u.values < 0):
        raise ValueError("E_qM expects a nonnegative field")
    return E_q(u, q) + M * abs(l2_norm_sq(u) - 1.0)


def E_qM_eta(d, q, params, cfg=SolverConfig()):
    """E_{q,M}(d) + f_eta(|d|).

    The minimizer of E_{q,M} over fields on d is normalized, so E_{q,M}(d) = E_q(d).
    """
    return energy(d, q, cfg) + f_eta(volume(d), params.eta)


def free_boundary_energy(u, q, params, threshold=None):
    """Energy of u alone with Omega = {u > threshold}, threshold = 1e-8 max(u) by default."""
    if np.any(u.values < 0):
        raise ValueError("free-boundary energy expects a nonnegative field")
    if threshold is None:
        threshold = SUPPORT_THRESHOLD * float(np.max(u.values, initial=0.0))
    return E_qM(u, q, params.M) + f_eta(support_volume(u, threshold), params.eta)
