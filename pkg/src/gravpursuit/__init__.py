"""Greedy Tikhonov-regularized sparse approximation on the sphere.

Downward continuation of satellite gravity data by matching pursuit over
a dictionary of spherical harmonics and Abel-Poisson kernels/wavelets,
with closed-form Sobolev inner products and kernel-center learning.
"""

from .basis import APK, APW, SH, Dictionary
from .forward import CoefficientModel, DataSet, NoiseSpec, generate_dataset, synthesize
from .geometry import BallPoint, Direction, SurfaceGrid, driscoll_healy, reuter
from .metrics import FieldOnGrid, abs_error_field, evaluate_approx, evaluate_model, rde, rrmse
from .solver import Approximation, SolverConfig, solve

__all__ = [
    "APK", "APW", "SH", "Dictionary",
    "CoefficientModel", "DataSet", "NoiseSpec", "generate_dataset", "synthesize",
    "BallPoint", "Direction", "SurfaceGrid", "driscoll_healy", "reuter",
    "FieldOnGrid", "abs_error_field", "evaluate_approx", "evaluate_model", "rde", "rrmse",
    "Approximation", "SolverConfig", "solve",
]

__version__ = "0.1.0"
