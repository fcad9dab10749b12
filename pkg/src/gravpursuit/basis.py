"""Dictionary elements on the sphere: spherical harmonics, Abel-Poisson
kernels and wavelets, their upward-continued values at satellite radius,
and center gradients for the kernel families.

Spherical harmonics are real and fully normalized (unit L2 norm on the
sphere, no Condon-Shortley phase): Y_{n,j} = p_{n,j} P_{n,|j|}(t) * cos(j*lon)
for j <= 0 and sin(j*lon) for j > 0.  The normalized associated Legendre
recurrence is used throughout, so degrees well beyond 100 stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import BallPoint, Direction, directions_to_cartesian, to_cartesian

__all__ = [
    "SH",
    "APK",
    "APW",
    "DictionaryElement",
    "Dictionary",
    "legendre",
    "assoc_legendre",
    "sh_eval",
    "sh_all",
    "sh_matrix",
    "apk_eval",
    "apw_eval",
    "upward_eval",
    "upward_grad_x",
    "element_eval",
    "apk_series",
    "apw_series",
    "sh_index",
]

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class SH:
    """Spherical harmonic of degree n and order j, -n <= j <= n."""

    n: int
    j: int

    def __post_init__(self):
        if self.n < 0 or abs(self.j) > self.n:
            raise ValueError(f"invalid degree/order ({self.n}, {self.j})")


@dataclass(frozen=True)
class APK:
    """Abel-Poisson kernel K(x, .) with center x in the open unit ball."""

    x: BallPoint


@dataclass(frozen=True)
class APW:
    """Abel-Poisson wavelet W(x, .) = K(x, .) - K(|x|x, .)."""

    x: BallPoint


DictionaryElement = Union[SH, APK, APW]


@dataclass(frozen=True)
class Dictionary:
    """Starting dictionary: an SH band plus shared kernel/wavelet seeds."""

    sh_max_degree: int
    kernel_seeds: tuple
    learning_enabled: bool = True

    def __post_init__(self):
        if self.sh_max_degree < 0:
            raise ValueError("sh_max_degree must be >= 0")
        for s in self.kernel_seeds:
            if not (0.0 <= s.h < 1.0):
                raise ValueError("kernel seed outside open ball")

    def size(self) -> int:
        return (self.sh_max_degree + 1) ** 2 + 2 * len(self.kernel_seeds)


def sh_index(n: int, j: int) -> int:
    """Flat index of (n, j) in degree-major, order-ascending layout."""
    return n * n + n + j


def legendre(n: int, t):
    """Legendre polynomial P_n(t) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    t = np.asarray(t, dtype=float)
    p_prev = np.ones_like(t)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = t.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * t * p - k * p_prev) / (k + 1), p
    return p if p.ndim else float(p)


def assoc_legendre(n: int, m: int, t):
    """Unnormalized associated Legendre P_{n,m}(t), no Condon-Shortley phase.

    Column recurrence seeded at the double-factorial diagonal; intended for
    moderate degrees (the normalized path in :func:`sh_all` covers high ones).
    """
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    t = np.asarray(t, dtype=float)
    u = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    # diagonal P_{m,m} = (2m-1)!! u^m
    p = np.ones_like(t)
    for k in range(1, m + 1):
        p = p * (2 * k - 1) * u
    if n == m:
        return p if p.ndim else float(p)
    p_prev = p
    p = (2 * m + 1) * t * p_prev
    for k in range(m + 2, n + 1):
        p, p_prev = ((2 * k - 1) * t * p - (k + m - 1) * p_prev) / (k - m), p
    return p if p.ndim else float(p)


def _sh_norm(n: int, j: int) -> float:
    if j == 0:
        return math.sqrt((2 * n + 1) / FOUR_PI)
    m = abs(j)
    return math.sqrt(
        (2 * n + 1) / (2.0 * math.pi) * math.exp(math.lgamma(n - m + 1) - math.lgamma(n + m + 1))
    )


def sh_eval(n: int, j: int, d: Direction) -> float:
    """Fully normalized real spherical harmonic Y_{n,j} at a direction."""
    if abs(j) > n:
        raise ValueError("order exceeds degree")
    out = sh_all(n, np.array([d.lon]), np.array([d.t]))
    return float(out[0, sh_index(n, j)])


def sh_all(max_degree: int, lon, t) -> np.ndarray:
    """All Y_{n,j} for n <= max_degree at given points.

    Returns shape (npoints, (max_degree+1)**2), flat layout of
    :func:`sh_index`.  Uses the standard normalized recurrence (stable at
    high degree).
    """
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    L = max_degree
    npts = t.shape[0]
    out = np.empty((npts, (L + 1) ** 2))
    u = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    sqrt2 = math.sqrt(2.0)

    q_diag = np.full(npts, 1.0 / math.sqrt(FOUR_PI))
    for m in range(0, L + 1):
        if m > 0:
            q_diag = q_diag * (u * math.sqrt((2 * m + 1) / (2.0 * m)))
        if m == 0:
            cosm = np.ones(npts)
            sinm = None
        else:
            cosm = np.cos(m * lon)
            sinm = np.sin(m * lon)
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
            if m == 0:
                out[:, sh_index(n, 0)] = q
            else:
                out[:, sh_index(n, -m)] = sqrt2 * q * cosm
                out[:, sh_index(n, m)] = sqrt2 * q * sinm
    return out


def sh_weighted_point(c, max_degree: int, lon: float, t: float, h: float = 1.0) -> float:
    """sum_{n,j} c[idx(n,j)] * h^n * Y_{n,j} at one direction.

    Scalar fast path for the center-learning objective, where the full
    (max_degree+1)^2 block of :func:`sh_all` would be wasted on a single
    point; runs the same normalized recurrence in plain floats.
    """
    t = float(t)
    lon = float(lon)
    h = float(h)
    u = math.sqrt(max(0.0, 1.0 - t * t))
    sqrt2 = math.sqrt(2.0)
    q_diag = 1.0 / math.sqrt(FOUR_PI)
    total = 0.0
    for m in range(0, max_degree + 1):
        if m > 0:
            q_diag = q_diag * u * math.sqrt((2 * m + 1) / (2.0 * m))
            if q_diag == 0.0:
                break
            cosm = math.cos(m * lon)
            sinm = math.sin(m * lon)
        hn = h ** m
        q_nm2 = 0.0
        q_nm1 = q_diag
        for n in range(m, max_degree + 1):
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
            base = n * n + n
            if m == 0:
                total += c[base] * hn * q
            else:
                total += hn * q * sqrt2 * (c[base - m] * cosm + c[base + m] * sinm)
            hn *= h
    return total


def sh_single(n: int, j: int, lon, t) -> np.ndarray:
    """Y_{n,j} at many points without building the full degree block."""
    if abs(j) > n:
        raise ValueError("order exceeds degree")
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = abs(j)
    u = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    q = np.full(t.shape[0], 1.0 / math.sqrt(FOUR_PI))
    for k in range(1, m + 1):
        q = q * (u * math.sqrt((2 * k + 1) / (2.0 * k)))
    if n > m:
        q_nm2, q_nm1 = q, math.sqrt(2 * m + 3) * t * q
        q = q_nm1
        for k in range(m + 2, n + 1):
            a = math.sqrt((4.0 * k * k - 1.0) / (k * k - m * m))
            b = -math.sqrt(
                (2.0 * k + 1.0) * ((k - 1.0) ** 2 - m * m) / ((2.0 * k - 3.0) * (k * k - m * m))
            )
            q = a * t * q_nm1 + b * q_nm2
            q_nm2, q_nm1 = q_nm1, q
    if j == 0:
        return q
    trig = np.cos(m * lon) if j < 0 else np.sin(m * lon)
    return math.sqrt(2.0) * q * trig


def sh_matrix(max_degree: int, lon, t, sigma=None) -> np.ndarray:
    """Matrix of (optionally upward-continued) SH values.

    Column idx(n, j) holds Y_{n,j}(eta_i), scaled by sigma_i^{-n-1} when
    per-point radii are given.  This is the batch form of
    :func:`upward_eval` for the SH family.
    """
    out = sh_all(max_degree, lon, t)
    if sigma is not None:
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        degrees = np.repeat(np.arange(max_degree + 1), 2 * np.arange(max_degree + 1) + 1)
        out = out * sigma[:, None] ** (-(degrees[None, :] + 1.0))
    return out


def _apk_closed(x_cart, h2, eta_cart):
    """Closed-form kernel value(s); x_cart (3,), eta_cart (..., 3)."""
    dot = eta_cart @ x_cart
    denom = 1.0 + h2 - 2.0 * dot
    return (1.0 - h2) / (FOUR_PI * denom ** 1.5)


def apk_eval(x: BallPoint, eta: Direction) -> float:
    """Abel-Poisson kernel K(x, eta) in closed form."""
    xc = x.to_cartesian()
    return float(_apk_closed(xc, x.h * x.h, to_cartesian(eta)))


def apw_eval(x: BallPoint, eta: Direction) -> float:
    """Abel-Poisson wavelet W(x, eta) = K(x, eta) - K(|x|x, eta)."""
    xc = x.to_cartesian()
    ec = to_cartesian(eta)
    outer = _apk_closed(xc, x.h * x.h, ec)
    inner = _apk_closed(x.h * xc, x.h ** 4, ec)
    return float(outer - inner)


def apk_series(x: BallPoint, eta: Direction, tol: float = 1e-16) -> float:
    """Truncated-series evaluation of K(x, eta); testing oracle."""
    return _kernel_series(x.h, float(np.dot(x.to_cartesian(), to_cartesian(eta))) / x.h if x.h > 0 else 1.0,
                          wavelet=False, tol=tol)


def apw_series(x: BallPoint, eta: Direction, tol: float = 1e-16) -> float:
    """Truncated-series evaluation of W(x, eta); testing oracle."""
    return _kernel_series(x.h, float(np.dot(x.to_cartesian(), to_cartesian(eta))) / x.h if x.h > 0 else 1.0,
                          wavelet=True, tol=tol)


def _kernel_series(h, ctau, wavelet, tol):
    if h == 0.0:
        return 0.0 if wavelet else 1.0 / FOUR_PI
    total = 0.0
    p_prev, p = 1.0, ctau
    n = 0
    while True:
        if n == 0:
            pn = 1.0
        elif n == 1:
            pn = ctau
        else:
            p_prev, p = p, ((2 * n - 1) * ctau * p - (n - 1) * p_prev) / n
            pn = p
        w = h ** n - h ** (2 * n) if wavelet else h ** n
        total += (2 * n + 1) / FOUR_PI * w * pn
        if (2 * n + 1) / FOUR_PI * h ** n < tol * (abs(total) + 1.0):
            return total
        n += 1
        if n > 200000:
            raise RuntimeError("series truncation budget exceeded")


def upward_eval(d: DictionaryElement, sigma: float, eta: Direction) -> float:
    """Value of the upward-continued element at radius sigma, direction eta.

    SH(n, j) maps to sigma^(-n-1) Y_{n,j}(eta); the kernel families scale
    their center into the ball by 1/sigma and pick up one factor 1/sigma.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ec = to_cartesian(eta)
    if isinstance(d, SH):
        return sigma ** (-d.n - 1) * sh_eval(d.n, d.j, eta)
    xc = d.x.to_cartesian()
    h = d.x.h
    if isinstance(d, APK):
        return float(_apk_closed(xc / sigma, (h / sigma) ** 2, ec)) / sigma
    outer = _apk_closed(xc / sigma, (h / sigma) ** 2, ec)
    inner = _apk_closed(h * xc / sigma, (h * h / sigma) ** 2, ec)
    return float(outer - inner) / sigma


def element_eval(d: DictionaryElement, eta: Direction) -> float:
    """Surface evaluation, identical to upward_eval with sigma = 1."""
    return upward_eval(d, 1.0, eta)


def upward_grad_x(d: DictionaryElement, sigma: float, eta: Direction) -> np.ndarray:
    """Cartesian gradient of upward_eval with respect to the kernel center.

    Continuous at x = 0; the wavelet's inner-kernel chain term vanishes
    there because the map x -> |x| x has zero Jacobian at the origin.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if isinstance(d, SH):
        raise TypeError("center gradient defined only for kernel families")
    ec = np.atleast_2d(to_cartesian(eta))
    g = upward_grad_x_batch(d, np.full(1, float(sigma)), ec)
    return g[0]


def upward_grad_x_batch(d: DictionaryElement, sigma: np.ndarray, eta_cart: np.ndarray) -> np.ndarray:
    """Rows of center gradients for many (sigma_i, eta_i); shape (l, 3)."""
    xc = d.x.to_cartesian()
    h = d.x.h
    s = sigma[:, None]
    u = xc[None, :] / s
    dot = eta_cart @ xc
    h2 = (h / sigma) ** 2
    denom = 1.0 + h2 - 2.0 * dot / sigma
    g_outer = (-2.0 * u / denom[:, None] ** 1.5
               + 3.0 * (1.0 - h2)[:, None] * (eta_cart - u) / denom[:, None] ** 2.5) / FOUR_PI
    g_outer = g_outer / (s * s)
    if isinstance(d, APK):
        return g_outer
    # wavelet: subtract chain-rule term of K((|x| x)/sigma, eta)
    if h == 0.0:
        return g_outer
    v = h * xc
    uv = v[None, :] / s
    h2v = (h * h / sigma) ** 2
    denomv = 1.0 + h2v - 2.0 * (eta_cart @ v) / sigma
    g_inner_u = (-2.0 * uv / denomv[:, None] ** 1.5
                 + 3.0 * (1.0 - h2v)[:, None] * (eta_cart - uv) / denomv[:, None] ** 2.5) / FOUR_PI
    g_inner_u = g_inner_u / (s * s)
    jac = h * np.eye(3) + np.outer(xc, xc) / h
    return g_outer - g_inner_u @ jac
