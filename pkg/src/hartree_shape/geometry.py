"""Admissible domains in R^3, their grids, volumes, rescalings and asymmetry."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Union

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from . import harmonics
from .errors import InvalidDomainError, ShapeFileError

UNIT_BALL_VOLUME = 4.0 * np.pi / 3.0
MAX_PERTURBATION = 0.5
_VOLUME_FLOOR = 1e-12


def ball_radius_for_volume(vol):
    return (3.0 * vol / (4.0 * np.pi)) ** (1.0 / 3.0)


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class CartesianGrid:
    """Cell-centred uniform grid on the cube [-R, R]^3 with ``n`` cells per axis."""

    half_extent: float
    n: int

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError("CartesianGrid needs n >= 8 cells per axis")

    @property
    def h(self):
        return 2.0 * self.half_extent / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self):
        return self.h**3

    @cached_property
    def axis(self):
        return -self.half_extent + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def points(self):
        """Node coordinates, shape (n, n, n, 3)."""
        a = self.axis
        pts = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)
        pts.setflags(write=False)
        return pts

    def scaled(self, factor):
        return CartesianGrid(self.half_extent * factor, self.n)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_i = i * r_max / (n - 1), i = 0..n-1."""

    r_max: float
    n: int

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if int(self.n) != self.n or self.n < 64:
            raise ValueError("RadialGrid needs n >= 64 nodes")

    @property
    def h(self):
        return self.r_max / (self.n - 1)

    @property
    def shape(self):
        return (self.n,)

    @cached_property
    def r(self):
        r = np.linspace(0.0, self.r_max, self.n)
        r.setflags(write=False)
        return r

    @cached_property
    def weights(self):
        """Trapezoidal weights of 4*pi*r^2 dr (volume element of radial functions)."""
        t = np.full(self.n, self.h)
        t[0] = t[-1] = 0.5 * self.h
        w = 4.0 * np.pi * self.r**2 * t
        w.setflags(write=False)
        return w

    def scaled(self, factor):
        return RadialGrid(self.r_max * factor, self.n)


# --------------------------------------------------------------------------
# domains


def _as_point(p):
    p = np.asarray(p, dtype=float).reshape(3)
    return tuple(float(x) for x in p)


def _sphere_exit(points, directions, center, radius):
    """Distance along unit ``directions`` from interior ``points`` to a sphere."""
    rel = points - np.asarray(center)
    b = np.einsum("ij,ij->i", rel, directions)
    c = np.einsum("ij,ij->i", rel, rel) - radius**2
    return -b + np.sqrt(np.maximum(b * b - c, 0.0))


@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidDomainError(f"ball radius must be positive, got {self.radius}")
        if self.volume() < _VOLUME_FLOOR:
            raise InvalidDomainError("degenerate ball")

    def volume(self):
        return 4.0 * np.pi * self.radius**3 / 3.0

    def contains(self, pts):
        pts = np.asarray(pts)
        return np.sum((pts - np.asarray(self.center)) ** 2, axis=-1) < self.radius**2

    def exit_distance(self, pts, directions):
        return _sphere_exit(pts, directions, self.center, self.radius)

    def outward_normal(self, pts):
        rel = np.asarray(pts) - np.asarray(self.center)
        return rel / np.linalg.norm(rel, axis=-1, keepdims=True)

    def bounding_radius(self):
        return float(np.linalg.norm(self.center)) + self.radius

    def centroid(self):
        return np.asarray(self.center)

    def transformed(self, scale=1.0, shift=(0.0, 0.0, 0.0)):
        c = np.asarray(self.center) * scale + np.asarray(shift, dtype=float)
        return Ball(self.radius * scale, c)


@dataclass(frozen=True)
class BallUnion:
    balls: tuple

    def __post_init__(self):
        balls = tuple(b if isinstance(b, Ball) else Ball(b[3], b[:3]) for b in self.balls)
        object.__setattr__(self, "balls", balls)
        if not balls:
            raise InvalidDomainError("ball union needs at least one ball")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                gap = (
                    np.linalg.norm(np.subtract(balls[i].center, balls[j].center))
                    - balls[i].radius
                    - balls[j].radius
                )
                if gap <= 0:
                    raise InvalidDomainError(f"balls {i} and {j} are not separated (gap {gap:.3g})")

    def volume(self):
        return float(sum(b.volume() for b in self.balls))

    def contains(self, pts):
        inside = np.zeros(np.asarray(pts).shape[:-1], dtype=bool)
        for b in self.balls:
            inside |= b.contains(pts)
        return inside

    def _owner(self, pts):
        d = np.stack([np.linalg.norm(pts - np.asarray(b.center), axis=-1) - b.radius for b in self.balls])
        return np.argmin(d, axis=0)

    def exit_distance(self, pts, directions):
        owner = self._owner(pts)
        out = np.empty(len(pts))
        for k, b in enumerate(self.balls):
            sel = owner == k
            out[sel] = b.exit_distance(pts[sel], directions[sel])
        return out

    def outward_normal(self, pts):
        owner = self._owner(pts)
        out = np.empty_like(np.asarray(pts, dtype=float))
        for k, b in enumerate(self.balls):
            sel = owner == k
            out[sel] = b.outward_normal(pts[sel])
        return out

    def bounding_radius(self):
        return max(b.bounding_radius() for b in self.balls)

    def centroid(self):
        v = np.array([b.volume() for b in self.balls])
        c = np.array([b.center for b in self.balls])
        return (v[:, None] * c).sum(axis=0) / v.sum()

    def transformed(self, scale=1.0, shift=(0.0, 0.0, 0.0)):
        return BallUnion(tuple(b.transformed(scale, shift) for b in self.balls))


def _normalize_coeffs(coeffs):
    if isinstance(coeffs, Mapping):
        items = coeffs.items()
    else:
        items = (((int(c[0]), int(c[1])), float(c[2])) for c in coeffs)
    merged = {}
    for (l, m), value in items:
        l, m = int(l), int(m)
        if l < 0 or abs(m) > l:
            raise InvalidDomainError(f"invalid harmonic index (l={l}, m={m})")
        merged[(l, m)] = merged.get((l, m), 0.0) + float(value)
    return tuple(sorted((l, m, v) for (l, m), v in merged.items() if v != 0.0))


@dataclass(frozen=True)
class NearlySpherical:
    """Star-shaped set with boundary {base_radius * (1 + phi(x)) x : |x| = 1}.

    ``coeffs`` maps (l, m) to the coefficient of the real harmonic Y_lm in phi;
    it is stored as a sorted tuple of (l, m, value) triples.
    """

    base_radius: float
    coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _normalize_coeffs(self.coeffs))
        if not (np.isfinite(self.base_radius) and self.base_radius > 0):
            raise InvalidDomainError("base_radius must be positive")
        dirs, _ = harmonics.sphere_quadrature(32, 64)
        phi = harmonics.expand(self.coeff_dict, dirs)
        if np.max(np.abs(phi)) > MAX_PERTURBATION:
            raise InvalidDomainError(
                f"|phi| reaches {np.max(np.abs(phi)):.3g} > {MAX_PERTURBATION}; not nearly spherical"
            )
        if self.volume() < _VOLUME_FLOOR:
            raise InvalidDomainError("degenerate nearly spherical set")

    @property
    def coeff_dict(self):
        return {(l, m): v for l, m, v in self.coeffs}

    @property
    def l_max(self):
        return max((l for l, _, _ in self.coeffs), default=0)

    def with_coeffs(self, coeffs):
        return NearlySpherical(self.base_radius, coeffs)

    def phi(self, directions):
        return harmonics.expand(self.coeff_dict, directions)

    def radius_at(self, directions):
        return self.base_radius * (1.0 + self.phi(directions))

    def is_ball(self):
        return all(l == 0 for l, _, _ in self.coeffs)

    def as_ball(self):
        """The equivalent Ball when only the l=0 mode is present."""
        if not self.is_ball():
            raise InvalidDomainError("shape has non-radial modes")
        r = self.radius_at(np.array([[0.0, 0.0, 1.0]]))[0]
        return Ball(r)

    def volume(self):
        dirs, w = harmonics.quadrature_for_degree(3 * self.l_max)
        return float(np.sum(w * self.radius_at(dirs) ** 3) / 3.0)

    def level(self, pts):
        """Negative inside, positive outside: |x| - R(x/|x|)."""
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        w = pts / np.where(r > 0, r, 1.0)[..., None]
        w[r == 0] = (0.0, 0.0, 1.0)
        return r - self.radius_at(w)

    def contains(self, pts):
        return self.level(pts) < 0

    def exit_distance(self, pts, directions, hmax=None):
        """Distance along ``directions`` to the boundary, by safeguarded regula falsi.

        ``hmax`` bounds the search; the point ``pts + hmax * directions`` must be
        outside.  Without it, a bracket is found by stepping outward.
        """
        pts = np.asarray(pts, dtype=float)
        directions = np.asarray(directions, dtype=float)
        m = len(pts)
        a = np.zeros(m)
        fa = self.level(pts)
        if hmax is None:
            b = np.full(m, 0.25 * self.base_radius)
            fb = self.level(pts + b[:, None] * directions)
            while np.any(fb < 0):
                sel = fb < 0
                b[sel] *= 2.0
                fb[sel] = self.level(pts[sel] + b[sel, None] * directions[sel])
        else:
            b = np.full(m, float(hmax))
            fb = self.level(pts + b[:, None] * directions)
        side = np.zeros(m)
        t = b.copy()
        for _ in range(100):
            t_new = (a * fb - b * fa) / (fb - fa)
            ft = self.level(pts + t_new[:, None] * directions)
            left = ft < 0
            # Illinois modification keeps the stale endpoint from stalling
            a = np.where(left, t_new, a)
            fa = np.where(left, ft, np.where(side == -1, fa * 0.5, fa))
            b = np.where(left, b, t_new)
            fb = np.where(left, np.where(side == 1, fb * 0.5, fb), ft)
            side = np.where(left, 1, -1)
            done = np.abs(t_new - t) <= 1e-14 * (1.0 + np.abs(t_new))
            t = t_new
            if np.all(done | (ft == 0)):
                break
        return t

    def outward_normal(self, pts, step=1e-6):
        pts = np.asarray(pts, dtype=float)
        grad = np.empty_like(pts)
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            grad[:, k] = (self.level(pts + e) - self.level(pts - e)) / (2 * step)
        return grad / np.linalg.norm(grad, axis=-1, keepdims=True)

    def bounding_radius(self):
        dirs, _ = harmonics.sphere_quadrature(48, 96)
        return float(np.max(self.radius_at(dirs)))

    def centroid(self):
        dirs, w = harmonics.quadrature_for_degree(4 * self.l_max + 1)
        R = self.radius_at(dirs)
        return (w[:, None] * dirs * R[:, None] ** 4 / 4.0).sum(axis=0) / self.volume()

    def boundary_points(self, n_polar=48, n_azimuth=96):
        dirs, _ = harmonics.sphere_quadrature(n_polar, n_azimuth)
        return dirs * self.radius_at(dirs)[:, None]

    def transformed(self, scale=1.0, shift=(0.0, 0.0, 0.0)):
        if np.any(np.asarray(shift) != 0):
            raise InvalidDomainError("nearly spherical sets are centred at the origin")
        return NearlySpherical(self.base_radius * scale, self.coeffs)


@dataclass(frozen=True, eq=False)
class GridMask:
    """Union of grid cells; the boundary is the staircase between in/out cells."""

    grid: CartesianGrid
    indicator: np.ndarray = field(repr=False)

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=bool)
        if ind.shape != self.grid.shape:
            raise InvalidDomainError("indicator shape does not match the grid")
        ind = ind.copy()
        ind.setflags(write=False)
        object.__setattr__(self, "indicator", ind)
        if self.volume() < _VOLUME_FLOOR:
            raise InvalidDomainError("empty grid mask")

    @classmethod
    def from_domain(cls, domain, grid):
        return cls(grid, domain.contains(grid.points))

    def volume(self):
        return float(self.indicator.sum() * self.grid.cell_volume)

    def _cell_index(self, pts):
        g = self.grid
        idx = np.floor((np.asarray(pts) + g.half_extent) / g.h).astype(int)
        ok = np.all((idx >= 0) & (idx < g.n), axis=-1)
        return np.clip(idx, 0, g.n - 1), ok

    def contains(self, pts):
        idx, ok = self._cell_index(pts)
        return ok & self.indicator[idx[..., 0], idx[..., 1], idx[..., 2]]

    exit_distance = None  # staircase boundary, handled by the discretization

    def bounding_radius(self):
        pts = self.grid.points[self.indicator]
        return float(np.max(np.linalg.norm(pts, axis=-1)) + np.sqrt(3) * self.grid.h / 2)

    def centroid(self):
        return self.grid.points[self.indicator].mean(axis=0)

    def transformed(self, scale=1.0, shift=(0.0, 0.0, 0.0)):
        if np.any(np.asarray(shift) != 0):
            raise InvalidDomainError("grid masks cannot be shifted off their grid")
        return GridMask(self.grid.scaled(scale), self.indicator)


Domain = Union[Ball, BallUnion, NearlySpherical, GridMask]


# --------------------------------------------------------------------------
# operations


def volume(d):
    """Lebesgue measure of the domain."""
    v = d.volume()
    if not v > _VOLUME_FLOOR:
        raise InvalidDomainError("domain volume below tolerance")
    return v


def rescale_to_unit_volume(d):
    """Dilate about the origin so that |d| = |B_1|; returns (domain, factor)."""
    rho = (UNIT_BALL_VOLUME / volume(d)) ** (1.0 / 3.0)
    return d.transformed(scale=rho), rho


def translate(d, shift):
    return d.transformed(shift=shift)


def _lens_volume(R, r, dist):
    if dist >= R + r:
        return 0.0
    if dist <= abs(R - r):
        return 4.0 * np.pi * min(R, r) ** 3 / 3.0
    return (
        np.pi
        * (R + r - dist) ** 2
        * (dist**2 + 2 * dist * r - 3 * r**2 + 2 * dist * R + 6 * r * R - 3 * R**2)
        / (12.0 * dist)
    )


def _overlap_function(d, rb):
    """Return x -> |d ∩ B(x, rb)|."""
    if isinstance(d, (Ball, BallUnion)):
        balls = d.balls if isinstance(d, BallUnion) else (d,)
        centers = np.array([b.center for b in balls])
        radii = np.array([b.radius for b in balls])

        def overlap(x):
            dist = np.linalg.norm(centers - x, axis=1)
            return sum(_lens_volume(R, rb, s) for R, s in zip(radii, dist))

        return overlap

    if isinstance(d, NearlySpherical):
        dirs, w = harmonics.sphere_quadrature(128, 256)
        R = d.radius_at(dirs)

        def overlap(x):
            b = dirs @ x
            disc = b * b - x @ x + rb * rb
            root = np.sqrt(np.maximum(disc, 0.0))
            lo = np.maximum(0.0, b - root)
            hi = np.minimum(R, b + root)
            seg = np.where((disc > 0) & (hi > lo), (hi**3 - lo**3) / 3.0, 0.0)
            return float(np.sum(w * seg))

        return overlap

    if isinstance(d, GridMask):
        pts = d.grid.points[d.indicator]
        h = d.grid.h
        cell = d.grid.cell_volume

        def overlap(x):
            # linear ramp across one cell width approximates the cut-cell fraction
            dist = np.linalg.norm(pts - x, axis=1)
            return float(np.clip((rb - dist) / h + 0.5, 0.0, 1.0).sum() * cell)

        return overlap

    raise TypeError(f"unsupported domain type {type(d).__name__}")


def fraenkel(d, tol=1e-4):
    """Fraenkel asymmetry and one attaining ball centre.

    A(d) = min_x |d Δ B(x)| / |d| where B(x) is the ball of volume |d| centred at x.
    """
    vol = volume(d)
    rb = ball_radius_for_volume(vol)
    overlap = _overlap_function(d, rb)

    def objective(x):
        return 2.0 * (1.0 - overlap(np.asarray(x)) / vol)

    c0 = np.asarray(d.centroid(), dtype=float)
    starts = [c0]
    shift = 0.25 * rb
    for k in range(3):
        for s in (1.0, -1.0):
            e = np.zeros(3)
            e[k] = s * shift
            starts.append(c0 + e)
    if isinstance(d, BallUnion):
        starts.extend(np.asarray(b.center) for b in d.balls)

    best_val, best_x = np.inf, c0
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": 1e-3 * tol * rb,
                "fatol": 1e-3 * tol,
                "maxiter": 4000,
                "initial_simplex": x0 + np.vstack([np.zeros(3), 0.1 * rb * np.eye(3)]),
            },
        )
        if res.fun < best_val - 1e-14:
            best_val, best_x = float(res.fun), res.x
    return float(min(max(best_val, 0.0), 2.0)), best_x


def fraenkel_asymmetry(d, tol=1e-4):
    return fraenkel(d, tol)[0]


def diameter(d):
    """Largest distance between two points of the closure of d."""
    if isinstance(d, Ball):
        return 2.0 * d.radius
    if isinstance(d, BallUnion):
        best = max(2.0 * b.radius for b in d.balls)
        for i, bi in enumerate(d.balls):
            for bj in d.balls[i + 1 :]:
                dist = np.linalg.norm(np.subtract(bi.center, bj.center))
                best = max(best, dist + bi.radius + bj.radius)
        return float(best)
    if isinstance(d, NearlySpherical):
        pts = d.boundary_points()
    elif isinstance(d, GridMask):
        h = d.grid.h
        centers = d.grid.points[d.indicator]
        corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * h / 2
        pts = (centers[:, None, :] + corners[None]).reshape(-1, 3)
    else:
        raise TypeError(f"unsupported domain type {type(d).__name__}")
    try:
        pts = pts[ConvexHull(pts).vertices]
    except Exception:
        pass
    return float(pdist(pts).max())


# --------------------------------------------------------------------------
# shape files


def _require(obj, key, where="shape"):
    if key not in obj:
        raise ShapeFileError(f"{where}: missing field '{key}'")
    return obj[key]


def shape_from_dict(obj):
    """Build a domain from the JSON shape schema."""
    if not isinstance(obj, dict):
        raise ShapeFileError("shape: top level must be an object")
    kind = _require(obj, "type")
    try:
        if kind == "nearly_spherical":
            base = float(_require(obj, "base_radius"))
            raw = obj.get("coeffs", [])
            coeffs = []
            for k, entry in enumerate(raw):
                if len(entry) != 3:
                    raise ShapeFileError(f"shape: field 'coeffs[{k}]' must be [l, m, value]")
                coeffs.append((int(entry[0]), int(entry[1]), float(entry[2])))
            return NearlySpherical(base, coeffs)
        if kind == "ball_union":
            balls = []
            for k, entry in enumerate(_require(obj, "balls")):
                if len(entry) != 4:
                    raise ShapeFileError(f"shape: field 'balls[{k}]' must be [cx, cy, cz, r]")
                balls.append(Ball(float(entry[3]), [float(x) for x in entry[:3]]))
            return BallUnion(tuple(balls))
        if kind == "ball":
            return Ball(float(_require(obj, "radius")), obj.get("center", (0.0, 0.0, 0.0)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ShapeFileError):
            raise
        raise ShapeFileError(f"shape: {exc}") from exc
    raise ShapeFileError(f"shape: field 'type' has unknown value {kind!r}")


def shape_to_dict(d):
    if isinstance(d, NearlySpherical):
        return {
            "type": "nearly_spherical",
            "base_radius": d.base_radius,
            "coeffs": [[l, m, v] for l, m, v in d.coeffs],
        }
    if isinstance(d, BallUnion):
        return {"type": "ball_union", "balls": [[*b.center, b.radius] for b in d.balls]}
    if isinstance(d, Ball):
        return {"type": "ball", "center": list(d.center), "radius": d.radius}
    raise TypeError(f"{type(d).__name__} has no shape-file representation")


def load_shape(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read shape file {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return shape_from_dict(obj)


def save_shape(d, path):
    Path(path).write_text(json.dumps(shape_to_dict(d), indent=2) + "\n", encoding="utf-8")
