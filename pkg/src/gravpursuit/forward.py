"""Truncated potential synthesis, dataset generation with multiplicative
noise, and batch application of the discretized upward-continuation
operator to dictionary elements.

The operator is applied pointwise with a per-sample radius ratio sigma_i,
which covers varying orbit heights.  Noise is multiplicative,
y_i * (1 + level * eps_i) with standard normal eps_i drawn from a seeded
PCG64 generator, so datasets are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import basis
from .basis import APK, APW, SH, DictionaryElement
from .geometry import directions_to_cartesian

__all__ = [
    "CoefficientModel",
    "DataSet",
    "NoiseSpec",
    "synthesize",
    "synthesize_batch",
    "generate_dataset",
    "apply_element",
    "apply_element_grad",
]

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class CoefficientModel:
    """Fully normalized real-basis potential coefficients f_{n,j}.

    Only degrees in [min_degree, max_degree] take part in synthesis; the
    default floor of 3 drops the (absent) low-degree part of geopotential
    models.
    """

    coeffs: dict
    min_degree: int = 3
    max_degree: int | None = None

    def __post_init__(self):
        maxd = self.max_degree
        if maxd is None:
            maxd = max((n for n, _ in self.coeffs), default=self.min_degree)
            object.__setattr__(self, "max_degree", maxd)
        if not 0 <= self.min_degree <= self.max_degree:
            raise ValueError("need 0 <= min_degree <= max_degree")
        for (n, j) in self.coeffs:
            if abs(j) > n:
                raise ValueError(f"order exceeds degree at ({n}, {j})")

    def degree_orders(self, n: int):
        return [(j, self.coeffs[(n, j)]) for j in range(-n, n + 1) if (n, j) in self.coeffs]


@dataclass(frozen=True)
class NoiseSpec:
    """Relative multiplicative noise amplitude plus RNG seed."""

    level: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("noise level must be >= 0")


@dataclass
class DataSet:
    """Satellite-track samples: per point radius ratio, direction, value."""

    sigma: np.ndarray
    lon: np.ndarray
    t: np.ndarray
    y: np.ndarray
    _eta_cart: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.lon = np.asarray(self.lon, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.size < 1:
            raise ValueError("dataset must contain at least one sample")
        if np.any(self.sigma <= 1.0):
            raise ValueError("all radius ratios must exceed 1")

    @property
    def size(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def eta_cart(self) -> np.ndarray:
        if self._eta_cart is None:
            self._eta_cart = directions_to_cartesian(self.lon, self.t)
        return self._eta_cart


def synthesize_batch(model: CoefficientModel, sigma, lon, t) -> np.ndarray:
    """Potential values sum_{n,j} f_{n,j} sigma^(-n-1) Y_{n,j} at many points.

    Streams over orders so memory stays O(npoints) even for high-degree
    models; all orders of one degree share the Legendre recurrences.
    """
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), t.shape)
    npts = t.shape[0]
    out = np.zeros(npts)
    if not model.coeffs:
        return out
    L = model.max_degree
    u = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    # sigma^(-n-1) built incrementally per degree
    inv_sigma = 1.0 / sigma
    sqrt2 = math.sqrt(2.0)
    q_diag = np.full(npts, 1.0 / math.sqrt(FOUR_PI))
    for m in range(0, L + 1):
        if m > 0:
            q_diag = q_diag * (u * math.sqrt((2 * m + 1) / (2.0 * m)))
        has_any = any((n, jj) in model.coeffs
                      for n in range(max(m, model.min_degree), L + 1)
                      for jj in ((0,) if m == 0 else (-m, m)))
        if not has_any:
            continue
        if m > 0:
            cosm = np.cos(m * lon)
            sinm = np.sin(m * lon)
        sig_pow = inv_sigma ** (m + 1)
        q_nm2 = None
        q_nm1 = q_diag
        for n in range(m, L + 1):
            if n == m:
                q = q_diag
            elif n == m + 1:
                q = math.sqrt(2 * m + 3) * t * q_diag
            else:
                a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
                b = -math.sqrt(
                    (2.0 * n + 1.0) * ((n - 1.0) ** 2 - m * m) / ((2.0 * n - 3.0) * (n * n - m * m))
                )
                q = a * t * q_nm1 + b * q_nm2
            if n > m:
                q_nm2, q_nm1 = q_nm1, q
            if n >= model.min_degree:
                if m == 0:
                    c = model.coeffs.get((n, 0))
                    if c is not None:
                        out += c * sig_pow * q
                else:
                    c_cos = model.coeffs.get((n, -m))
                    c_sin = model.coeffs.get((n, m))
                    if c_cos is not None:
                        out += c_cos * sqrt2 * sig_pow * q * cosm
                    if c_sin is not None:
                        out += c_sin * sqrt2 * sig_pow * q * sinm
            sig_pow = sig_pow * inv_sigma
    return out


def synthesize(model: CoefficientModel, sigma: float, eta) -> float:
    """Scalar truncated synthesis at radius ratio sigma and direction eta."""
    if sigma < 1.0:
        raise ValueError("sigma must be >= 1")
    return float(synthesize_batch(model, np.full(1, float(sigma)),
                                  np.full(1, eta.lon), np.full(1, eta.t))[0])


def generate_dataset(model: CoefficientModel, orbit, noise: NoiseSpec) -> DataSet:
    """Synthesize data along an orbit and apply multiplicative noise.

    ``orbit`` provides (sigma, lon, t) arrays or an object with those
    attributes.  Deterministic for a fixed seed (PCG64 stream, one draw per
    sample in order).
    """
    if hasattr(orbit, "sigma"):
        sigma, lon, t = orbit.sigma, orbit.lon, orbit.t
    else:
        sigma, lon, t = orbit
    sigma = np.asarray(sigma, dtype=float)
    lon = np.asarray(lon, dtype=float)
    t = np.asarray(t, dtype=float)
    if sigma.size == 0:
        raise ValueError("orbit must be non-empty")
    clean = synthesize_batch(model, sigma, lon, t)
    if noise.level > 0.0:
        rng = np.random.Generator(np.random.PCG64(noise.seed))
        eps = rng.standard_normal(sigma.shape[0])
        y = clean * (1.0 + noise.level * eps)
    else:
        y = clean
    return DataSet(sigma=sigma, lon=lon, t=t, y=y)


def apply_element(d: DictionaryElement, ds: DataSet) -> np.ndarray:
    """Column of upward-continued element values at all dataset points."""
    return apply_element_raw(d, ds.sigma, ds.lon, ds.t, ds.eta_cart)


def apply_element_raw(d: DictionaryElement, sigma, lon, t, eta_cart=None) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if isinstance(d, SH):
        col = basis.sh_single(d.n, d.j, lon, t)
        return col * sigma ** (-d.n - 1.0)
    if eta_cart is None:
        eta_cart = directions_to_cartesian(lon, t)
    xc = d.x.to_cartesian()
    h = d.x.h
    dot = eta_cart @ xc
    h2 = (h / sigma) ** 2
    denom = 1.0 + h2 - 2.0 * dot / sigma
    outer = (1.0 - h2) / (FOUR_PI * denom ** 1.5)
    if isinstance(d, APK):
        return outer / sigma
    h2i = (h * h / sigma) ** 2
    denomi = 1.0 + h2i - 2.0 * h * dot / sigma
    inner = (1.0 - h2i) / (FOUR_PI * denomi ** 1.5)
    return (outer - inner) / sigma


def apply_element_grad(d: DictionaryElement, ds: DataSet) -> np.ndarray:
    """Rows of center gradients of the column; shape (l, 3)."""
    if isinstance(d, SH):
        raise TypeError("center gradient defined only for kernel families")
    return basis.upward_grad_x_batch(d, ds.sigma, ds.eta_cart)
