"""Constrained Hartree ground states and volume-constrained shape optimization
for a charged condensate confined to a domain in R^3."""

from .errors import (
    DescentError,
    DiagnosticsError,
    InvalidDomainError,
    NumericalFailure,
    ShapeFileError,
)
from .geometry import (
    Ball,
    BallUnion,
    CartesianGrid,
    GridMask,
    NearlySpherical,
    RadialGrid,
    UNIT_BALL_VOLUME,
    diameter,
    fraenkel_asymmetry,
    rescale_to_unit_volume,
    volume,
)
from .fields import ScalarField, EnergyBreakdown, dirichlet_energy, l2_norm_sq, normalize, dilate
from .coulomb import potential, bilinear_D
from .hartree import GroundState, SolverConfig, solve_ground_state, energy

__all__ = [
    "Ball",
    "BallUnion",
    "CartesianGrid",
    "DescentError",
    "DiagnosticsError",
    "EnergyBreakdown",
    "GridMask",
    "GroundState",
    "InvalidDomainError",
    "NearlySpherical",
    "NumericalFailure",
    "RadialGrid",
    "ScalarField",
    "ShapeFileError",
    "SolverConfig",
    "UNIT_BALL_VOLUME",
    "bilinear_D",
    "diameter",
    "dilate",
    "dirichlet_energy",
    "energy",
    "fraenkel_asymmetry",
    "l2_norm_sq",
    "normalize",
    "potential",
    "rescale_to_unit_volume",
    "solve_ground_state",
    "volume",
]
