"""Error metrics and gridded surface evaluation of approximations and
reference coefficient models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import CoefficientModel, synthesize_batch
from .geometry import SurfaceGrid
from .solver import Approximation

__all__ = [
    "FieldOnGrid",
    "evaluate_approx",
    "evaluate_model",
    "rrmse",
    "rde",
    "abs_error_field",
]


@dataclass
class FieldOnGrid:
    """Potential values aligned with a surface grid."""

    grid: SurfaceGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != len(self.grid.points):
            raise ValueError("values and grid lengths differ")


def evaluate_approx(a: Approximation, grid: SurfaceGrid) -> FieldOnGrid:
    """Surface field of an expansion: f(eta) = sum alpha_n d_n(eta)."""
    lon, t = grid.lon_t_arrays()
    return FieldOnGrid(grid, a.evaluate(lon, t))


def evaluate_model(m: CoefficientModel, grid: SurfaceGrid) -> FieldOnGrid:
    """Truncated synthesis at sigma = 1 on every grid point."""
    lon, t = grid.lon_t_arrays()
    return FieldOnGrid(grid, synthesize_batch(m, 1.0, lon, t))


def _check_same_grid(a: FieldOnGrid, b: FieldOnGrid):
    if a.values.shape != b.values.shape or a.grid.points != b.grid.points:
        raise ValueError("fields live on different grids")


def rrmse(approx: FieldOnGrid, reference: FieldOnGrid, area_weighted: bool = False) -> float:
    """Relative RMS error sqrt(sum (f_a - f)^2 / sum f^2) over grid points.

    Unweighted by default even on pole-oversampling equiangular grids; the
    optional area weighting multiplies each point by sqrt(1 - t^2).
    """
    _check_same_grid(approx, reference)
    diff2 = (approx.values - reference.values) ** 2
    ref2 = reference.values ** 2
    if area_weighted:
        _, t = reference.grid.lon_t_arrays()
        w = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        diff2 = diff2 * w
        ref2 = ref2 * w
    denom = float(ref2.sum())
    if denom <= 0.0:
        raise ValueError("reference field has zero norm")
    return math.sqrt(float(diff2.sum()) / denom)


def rde(residual_norm: float, initial_norm: float) -> float:
    """Relative data error ||R^N|| / ||R^0||."""
    if initial_norm <= 0:
        raise ValueError("initial norm must be positive")
    return residual_norm / initial_norm


def abs_error_field(approx: FieldOnGrid, reference: FieldOnGrid) -> FieldOnGrid:
    """Pointwise absolute approximation error |f_a - f|."""
    _check_same_grid(approx, reference)
    return FieldOnGrid(approx.grid, np.abs(approx.values - reference.values))
