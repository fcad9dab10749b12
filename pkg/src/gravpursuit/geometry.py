"""Spherical coordinates, the local moving frame, and point grids on the sphere.

Directions on the unit sphere are parametrized by longitude ``lon`` in
[0, 2*pi) and polar distance ``t = cos(theta)`` in [-1, 1].  Points inside
the open unit ball carry a radial magnitude ``h < 1`` on top of a direction.

Two grids are provided: the equiangular Driscoll-Healy grid (used for field
evaluation and mapping) and the quasi-uniform Reuter grid (used to seed
kernel centers).  Both constructions are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Direction",
    "BallPoint",
    "GridKind",
    "SurfaceGrid",
    "to_cartesian",
    "from_cartesian",
    "moving_frame",
    "driscoll_healy",
    "reuter",
    "directions_to_cartesian",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere: longitude and polar distance cos(theta)."""

    lon: float
    t: float

    def __post_init__(self):
        if not -1.0 <= self.t <= 1.0:
            raise ValueError(f"polar distance t={self.t} outside [-1, 1]")
        object.__setattr__(self, "lon", float(self.lon) % TWO_PI)


@dataclass(frozen=True)
class BallPoint:
    """A point in the open unit ball: radial magnitude plus direction.

    When ``h == 0`` the direction content is irrelevant; consumers must be
    well defined regardless (see the combined-gradient extension in the
    Sobolev module).
    """

    h: float
    dir: Direction = field(default_factory=lambda: Direction(0.0, 1.0))

    def __post_init__(self):
        if not 0.0 <= self.h < 1.0:
            raise ValueError(f"radial magnitude h={self.h} outside [0, 1)")

    def to_cartesian(self) -> np.ndarray:
        return to_cartesian(self.dir, self.h)

    @staticmethod
    def from_cartesian(p) -> "BallPoint":
        p = np.asarray(p, dtype=float)
        r = float(np.linalg.norm(p))
        if r == 0.0:
            return BallPoint(0.0)
        _, d = from_cartesian(p)
        return BallPoint(r, d)


class GridKind(Enum):
    DRISCOLL_HEALY = "driscoll-healy"
    REUTER = "reuter"


@dataclass(frozen=True)
class SurfaceGrid:
    """An ordered list of directions with a record of how it was built."""

    points: tuple
    kind: GridKind
    params: tuple

    def __len__(self):
        return len(self.points)

    def lon_t_arrays(self):
        lon = np.array([d.lon for d in self.points])
        t = np.array([d.t for d in self.points])
        return lon, t


def to_cartesian(d: Direction, r: float = 1.0) -> np.ndarray:
    """Cartesian point at radius ``r`` along direction ``d``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    s = math.sqrt(max(0.0, 1.0 - d.t * d.t))
    return np.array([r * s * math.cos(d.lon), r * s * math.sin(d.lon), r * d.t])


def from_cartesian(p) -> tuple[float, Direction]:
    """Radius and direction of a nonzero Cartesian point.

    At the poles (|t| = 1) the longitude is fixed to 0 so round trips are
    deterministic.
    """
    p = np.asarray(p, dtype=float)
    r = float(np.linalg.norm(p))
    if r == 0.0:
        raise ValueError("degenerate point")
    t = p[2] / r
    t = min(1.0, max(-1.0, t))
    if abs(t) == 1.0 or (p[0] == 0.0 and p[1] == 0.0):
        lon = 0.0
    else:
        lon = math.atan2(p[1], p[0]) % TWO_PI
    return r, Direction(lon, t)


def moving_frame(d: Direction):
    """Orthonormal local frame (eps_r, eps_lon, eps_t) at a direction.

    eps_r is the radial unit vector, eps_lon points along increasing
    longitude and eps_t along increasing polar distance; they satisfy
    d(eps_r)/d(lon) = sqrt(1-t^2) * eps_lon and
    d(eps_r)/dt = eps_t / sqrt(1-t^2).
    """
    if abs(d.t) >= 1.0:
        raise ValueError("polar frame undefined")
    s = math.sqrt(1.0 - d.t * d.t)
    cl, sl = math.cos(d.lon), math.sin(d.lon)
    eps_r = np.array([s * cl, s * sl, d.t])
    eps_lon = np.array([-sl, cl, 0.0])
    eps_t = np.array([-d.t * cl, -d.t * sl, s])
    return eps_r, eps_lon, eps_t


def driscoll_healy(n_lat: int, n_lon: int) -> SurfaceGrid:
    """Closed equiangular grid with both poles included.

    Co-latitudes theta_i = i*pi/(n_lat-1), longitudes phi_j = 2*pi*j/n_lon;
    the grid has exactly n_lat*n_lon points, latitude-outer order.
    """
    if n_lat < 2 or n_lon < 1:
        raise ValueError("need n_lat >= 2 and n_lon >= 1")
    pts = []
    for i in range(n_lat):
        theta = i * math.pi / (n_lat - 1)
        t = math.cos(theta)
        for j in range(n_lon):
            pts.append(Direction(TWO_PI * j / n_lon, t))
    return SurfaceGrid(tuple(pts), GridKind.DRISCOLL_HEALY, (n_lat, n_lon))


def reuter(gamma: int) -> SurfaceGrid:
    """Quasi-uniform Reuter grid with control parameter gamma >= 1.

    Both poles, plus rings at theta_i = i*pi/gamma carrying equispaced
    longitudes, with the per-ring count chosen so neighbouring points are
    roughly pi/gamma apart.
    """
    if gamma < 1:
        raise ValueError("gamma must be a positive integer")
    pts = [Direction(0.0, 1.0)]
    for i in range(1, gamma):
        theta = i * math.pi / gamma
        ct, st = math.cos(theta), math.sin(theta)
        arg = (math.cos(math.pi / gamma) - ct * ct) / (st * st)
        arg = min(1.0, max(-1.0, arg))
        n_i = int(math.floor(TWO_PI / math.acos(arg)))
        n_i = max(1, n_i)
        for j in range(n_i):
            pts.append(Direction(TWO_PI * j / n_i, ct))
    pts.append(Direction(0.0, -1.0))
    return SurfaceGrid(tuple(pts), GridKind.REUTER, (gamma,))


def reuter_with_min_points(min_points: int) -> SurfaceGrid:
    """Smallest-gamma Reuter grid with at least ``min_points`` points."""
    gamma = 1
    while True:
        g = reuter(gamma)
        if len(g) >= min_points:
            return g
        gamma += 1


def directions_to_cartesian(lon, t) -> np.ndarray:
    """Vectorized unit vectors for arrays of (lon, t); shape (n, 3)."""
    lon = np.asarray(lon, dtype=float)
    t = np.asarray(t, dtype=float)
    s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    return np.stack([s * np.cos(lon), s * np.sin(lon), t], axis=-1)
