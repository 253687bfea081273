"""SI parameters of a superconducting island <-> dimensionless charge q."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ShapeFileError

# CODATA 2018 exact/recommended values
HBAR = 1.054571817e-34  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C
EPSILON_0 = 8.8541878128e-12  # F / m
ELECTRON_MASS = 9.1093837015e-31  # kg


@dataclass(frozen=True)
class PhysicalParams:
    m_star: float
    N_pairs: int
    epsilon_r: float
    V: float

    def __post_init__(self):
        for name in ("m_star", "epsilon_r", "V"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value}")
        if int(self.N_pairs) != self.N_pairs or self.N_pairs < 1:
            raise ValueError(f"N_pairs must be an integer >= 1, got {self.N_pairs}")

    @classmethod
    def from_dict(cls, obj):
        keys = {"m_star_kg": "m_star", "n_pairs": "N_pairs", "epsilon_r": "epsilon_r", "volume_m3": "V"}
        kw = {}
        for key, attr in keys.items():
            if key not in obj:
                raise ShapeFileError(f"params: missing field '{key}'")
            try:
                kw[attr] = int(obj[key]) if attr == "N_pairs" else float(obj[key])
            except (TypeError, ValueError) as exc:
                raise ShapeFileError(f"params: field '{key}' is not a number") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path):
        text = Path(path).read_text(encoding="utf-8")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ShapeFileError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(obj)


def length_scale(p):
    """Radius of the ball with the island's volume, (3V / 4 pi)^{1/3}."""
    return (3.0 * p.V / (4.0 * math.pi)) ** (1.0 / 3.0)


def charge_parameter(p, L=None):
    """q = 2 e^2 (N - 1) m* L / (pi hbar^2 eps0 eps_r)."""
    L = length_scale(p) if L is None else L
    return (
        2.0 * ELEMENTARY_CHARGE**2 * (p.N_pairs - 1) * p.m_star * L
        / (math.pi * HBAR**2 * EPSILON_0 * p.epsilon_r)
    )


def energy_prefactor(p):
    """N hbar^2 / (2 m* L^2), the Joule value of one dimensionless energy unit."""
    return p.N_pairs * HBAR**2 / (2.0 * p.m_star * length_scale(p) ** 2)


def energy_to_si(E, p):
    return energy_prefactor(p) * E
