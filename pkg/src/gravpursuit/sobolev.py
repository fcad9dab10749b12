"""Closed-form H2 inner products between Abel-Poisson kernels/wavelets and
their center gradients, plus SH-vs-kernel products and a truncated-series
oracle.

Every kernel/wavelet pair product reduces to terms
(1/4pi) sum_n (n+0.5)^4 (2n+1) q^n P_n(tau) with q = h^m * ht^mt < 1, which
in turn reduce to the six radial-derivative ladders (q d/dq)^k phi(q),
k = 0..5, of the generating function phi(q) = (1 + q^2 - 2 q tau)^(-1/2).
All ladder evaluations share the denominator powers and the five subterms
tau*q - 2^n q^2, which is what makes this path fast enough to sit inside
the per-candidate objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import APK, APW, sh_eval
from .geometry import BallPoint, to_cartesian

__all__ = [
    "LadderInput",
    "PairContext",
    "phi_ladder",
    "sob_term",
    "series_oracle",
    "grad_q",
    "q_grad_tau",
    "combined_grad",
    "ladder_grad",
    "h2_kernel_inner",
    "h2_kernel_inner_grad",
    "h2_sh_kernel_inner",
    "h2_sh_kernel_inner_grad",
    "h2_sh_norm",
]

FOUR_PI = 4.0 * math.pi
_Q_MAX = 1.0 - 1e-12
# assembly weights of (q d_q)^k phi in the (n+0.5)^4 (2n+1) expansion:
# (1/64) * sum_k binom(5,k) 2^k n^k; the weights sum to 3^5 = 243
SOB_WEIGHTS = np.array([1.0, 10.0, 40.0, 80.0, 80.0, 32.0])


@dataclass(frozen=True)
class LadderInput:
    """Ladder arguments: q = h^m * ht^mt in [0, 1) and tau = cos(angle)."""

    q: float
    tau: float


@dataclass(frozen=True)
class PairContext:
    """A kernel-pair configuration: centers and exponent selectors.

    m and mt are 1 for a plain kernel power h^n and 2 for the squared
    power h^(2n) contributed by a wavelet component.
    """

    x: BallPoint
    xt: BallPoint
    m: int = 1
    mt: int = 1

    def __post_init__(self):
        if self.m not in (1, 2) or self.mt not in (1, 2):
            raise ValueError("exponent selectors must be 1 or 2")


def _check_q(q):
    if np.any(np.asarray(q) >= _Q_MAX) or np.any(np.asarray(q) < 0):
        raise ValueError("outside open ball")


def phi_ladder(q, tau):
    """The six ladders (q d_q)^k phi(q), k = 0..5; vectorized.

    Returns an array with a trailing axis of length 6.  Shares the
    subterms tau*q - 2^n q^2 and the half-integer denominator powers
    across all six closed forms.
    """
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau, dtype=float)
    _check_q(q)
    tq = tau * q
    q2 = q * q
    a1 = tq - q2
    a2 = tq - 2.0 * q2
    a4 = tq - 4.0 * q2
    a8 = tq - 8.0 * q2
    a16 = tq - 16.0 * q2
    denom = 1.0 + q2 - 2.0 * tq
    d3 = denom ** 1.5
    d5 = d3 * denom
    d7 = d5 * denom
    d9 = d7 * denom
    d11 = d9 * denom

    v0 = 1.0 / np.sqrt(denom)
    v1 = a1 / d3
    v2 = a2 / d3 + 3.0 * a1 * a1 / d5
    v3 = a4 / d3 + 9.0 * a1 * a2 / d5 + 15.0 * a1 ** 3 / d7
    v4 = (a8 / d3
          + (12.0 * a4 * a1 + 9.0 * a2 * a2) / d5
          + 90.0 * a1 * a1 * a2 / d7
          + 105.0 * a1 ** 4 / d9)
    v5 = (a16 / d3
          + (15.0 * a8 * a1 + 30.0 * a4 * a2) / d5
          + (150.0 * a4 * a1 * a1 + 225.0 * a2 * a2 * a1) / d7
          + 1050.0 * a1 ** 3 * a2 / d9
          + 945.0 * a1 ** 5 / d11)
    return np.stack([v0, v1, v2, v3, v4, v5], axis=-1)


def sob_term(q, tau):
    """(1/4pi) sum_n (n+0.5)^4 (2n+1) q^n P_n(tau) in closed form."""
    v = phi_ladder(q, tau)
    return (v @ SOB_WEIGHTS) / (64.0 * math.pi)


# --- compensated (double-double) helpers -----------------------------------
# The raw series sum_n n^k q^n P_n(tau) suffers catastrophic cancellation for
# q near 1 and tau < 0: individual terms reach ~1e9 while the sum is O(1).
# Plain double summation then caps out around 1e-6 relative accuracy, far
# from what is needed to certify the closed forms.  The oracle therefore
# accumulates in error-free-transformed double-double arithmetic.

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    ca = _SPLITTER * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_norm(hi, lo):
    s = hi + lo
    return s, lo - (s - hi)


def _dd_add(xh, xl, yh, yl):
    s, e = _two_sum(xh, yh)
    return _dd_norm(s, e + (xl + yl))


def _dd_mul(xh, xl, yh, yl):
    p, e = _two_prod(xh, yh)
    return _dd_norm(p, e + (xh * yl + xl * yh))


def _dd_scale(xh, xl, c):
    p, e = _two_prod(xh, c)
    return _dd_norm(p, e + xl * c)


def _dd_div_int(xh, xl, c):
    q1 = xh / c
    p, pe = _two_prod(q1, c)
    rh, rl = _dd_add(xh, xl, -p, -pe)
    return _dd_norm(q1, (rh + rl) / c)


def series_oracle_all(q, tau, tol: float = 1e-22) -> np.ndarray:
    """All six series sum_n n^k q^n P_n(tau), k = 0..5, in one pass.

    Forward summation with the Legendre three-term recurrence, all carried
    in compensated double-double arithmetic so the result is accurate in an
    absolute sense down to ~1e-20 even where the terms cancel massively.
    Vectorized; returns shape (..., 6).
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_q(q)
    qmax = float(np.max(q))
    acc = [(np.zeros_like(q), np.zeros_like(q)) for _ in range(6)]
    # n = 0 term: contributes 1 to k = 0 only (0^0 = 1)
    acc[0] = (np.ones_like(q), np.zeros_like(q))
    if qmax > 0.0:
        n_trunc = _truncation_degree(qmax, 5, tol)
        qn = (q.copy(), np.zeros_like(q))            # q^n
        p1 = (np.ones_like(q), np.zeros_like(q))     # P_{n-1}
        p0 = (tau.copy(), np.zeros_like(q))          # P_n
        for n in range(1, n_trunc + 1):
            if n > 1:
                ah, al = _two_prod(2.0 * n - 1.0, tau)
                t1 = _dd_mul(*p0, ah, al)
                t2 = _dd_scale(*p1, n - 1.0)
                diff = _dd_add(*t1, -t2[0], -t2[1])
                p1, p0 = p0, _dd_div_int(*diff, float(n))
            base = _dd_mul(*qn, *p0)
            nf = float(n)
            powers = (1.0, nf, nf * nf, nf ** 3, nf ** 4)
            for k in range(5):
                term = _dd_scale(*base, powers[k])
                acc[k] = _dd_add(*acc[k], *term)
            n5h, n5l = _two_prod(nf ** 4, nf)
            term = _dd_mul(*base, n5h, n5l)
            acc[5] = _dd_add(*acc[5], *term)
            qn = _dd_scale(*qn, q)
    out = np.stack([h + l for h, l in acc], axis=-1)
    return out


def series_oracle(q, tau, k: int, tol: float = 1e-22):
    """sum_n n^k q^n P_n(tau) by stabilized partial summation.

    Scalar or vectorized; see :func:`series_oracle_all` for the mechanism.
    """
    if not 0 <= k <= 5:
        raise ValueError("k must be in 0..5")
    scalar = np.isscalar(q) or np.ndim(q) == 0
    out = series_oracle_all(q, tau, tol)[..., k]
    return float(out[0]) if scalar else out


def _truncation_degree(qmax, k, tol):
    n = max(8, int(k / -math.log(qmax)) + 2) if qmax < 1.0 else 1
    while True:
        ratio = qmax * ((n + 2.0) / (n + 1.0)) ** k
        if ratio < 1.0:
            tail = math.exp(k * math.log(n + 1.0) + (n + 1.0) * math.log(qmax)) / (1.0 - ratio)
            if tail < tol:
                return n
        n = n + max(8, n // 8)
        if n > 2_000_000:
            raise RuntimeError("series truncation budget exceeded")


def _xi(p: BallPoint) -> np.ndarray:
    """Unit direction of a ball point (its stored direction when h = 0)."""
    return to_cartesian(p.dir, 1.0)


def grad_q(ctx: PairContext) -> np.ndarray:
    """Cartesian gradient of q = h^m * ht^mt with respect to x."""
    htm = ctx.xt.h ** ctx.mt
    if ctx.m == 2:
        return 2.0 * htm * ctx.x.to_cartesian()
    if ctx.x.h == 0.0:
        raise ValueError("use combined form")
    return htm * _xi(ctx.x)


def q_grad_tau(ctx: PairContext) -> np.ndarray:
    """q * gradient of tau: the tangential projection of the other direction."""
    xi = _xi(ctx.x)
    xit = _xi(ctx.xt)
    tang = xit - (xit @ xi) * xi
    return ctx.xt.h ** ctx.mt * ctx.x.h ** (ctx.m - 1) * tang


def combined_grad(ctx: PairContext, n: int) -> np.ndarray:
    """(tau - 2^n q) grad q + q grad tau, extended continuously to x = 0.

    For m = 1 this reduces to ht^(mt-1) * xt - 2^n ht^(2 mt) * x in
    Cartesian form, which is finite everywhere (equal to ht^mt * xit at
    x = 0).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    htm = ctx.xt.h ** ctx.mt
    x = ctx.x.to_cartesian()
    if ctx.m == 1:
        if ctx.xt.h == 0.0:
            return np.zeros(3)
        return ctx.xt.h ** (ctx.mt - 1) * ctx.xt.to_cartesian() - (2.0 ** n) * htm * htm * x
    h = ctx.x.h
    q = h ** 2 * htm
    if h == 0.0:
        return np.zeros(3)
    xi = _xi(ctx.x)
    xit = _xi(ctx.xt)
    tau = float(xi @ xit)
    return (tau - (2.0 ** n) * q) * 2.0 * htm * x + htm * (h * xit - tau * x)


def ladder_grad(ctx: PairContext) -> np.ndarray:
    """Gradients of all six ladders with respect to x; shape (6, 3).

    All radial/tangential derivative occurrences are routed through
    :func:`combined_grad`, so the x = 0 case stays finite.
    """
    h, ht = ctx.x.h, ctx.xt.h
    q = h ** ctx.m * ht ** ctx.mt
    if q > 0.0:
        # clamp: rounding in the dot product must not push D = 1+q^2-2q*tau
        # to zero for near-boundary self products
        tau = min(1.0, max(-1.0, float(_xi(ctx.x) @ _xi(ctx.xt))))
    else:
        tau = 1.0
    g = np.stack([combined_grad(ctx, n) for n in range(6)], axis=0)
    return _ladder_grad_core(q, tau, g)


def _ladder_grad_core(q, tau, g):
    """Assemble the six gradient ladders from combined terms G_0..G_5.

    q, tau: scalars or (...,) arrays; g: (..., 6, 3) combined terms.
    Returns (..., 6, 3).
    """
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau, dtype=float)
    _check_q(q)
    tq = tau * q
    q2 = q * q
    a1 = tq - q2
    a2 = tq - 2.0 * q2
    a4 = tq - 4.0 * q2
    a8 = tq - 8.0 * q2
    a16 = tq - 16.0 * q2
    denom = 1.0 + q2 - 2.0 * tq
    d3 = denom ** 1.5
    d5 = d3 * denom
    d7 = d5 * denom
    d9 = d7 * denom
    d11 = d9 * denom
    d13 = d11 * denom

    def e(x):
        return np.asarray(x)[..., None]

    g0, g1, g2, g3, g4, g5 = (g[..., i, :] for i in range(6))
    n0 = g0 / e(d3)
    n1 = g1 / e(d3) + e(3.0 * a1 / d5) * g0
    n2 = (g2 / e(d3)
          + (e(3.0 * a2) * g0 + e(6.0 * a1) * g1) / e(d5)
          + e(15.0 * a1 * a1 / d7) * g0)
    n3 = (g3 / e(d3)
          + (e(3.0 * a4) * g0 + e(9.0 * a2) * g1 + e(9.0 * a1) * g2) / e(d5)
          + (e(45.0 * a1 * a2) * g0 + e(45.0 * a1 * a1) * g1) / e(d7)
          + e(105.0 * a1 ** 3 / d9) * g0)
    n4 = (g4 / e(d3)
          + (e(3.0 * a8) * g0 + e(12.0 * a1) * g3 + e(12.0 * a4) * g1 + e(18.0 * a2) * g2) / e(d5)
          + (e(60.0 * a4 * a1 + 45.0 * a2 * a2) * g0 + e(180.0 * a1 * a2) * g1
             + e(90.0 * a1 * a1) * g2) / e(d7)
          + (e(630.0 * a1 * a1 * a2) * g0 + e(420.0 * a1 ** 3) * g1) / e(d9)
          + e(945.0 * a1 ** 4 / d11) * g0)
    n5 = (g5 / e(d3)
          + (e(3.0 * a16) * g0 + e(15.0 * a1) * g4 + e(15.0 * a8) * g1
             + e(30.0 * a2) * g3 + e(30.0 * a4) * g2) / e(d5)
          + (e(75.0 * a8 * a1 + 150.0 * a4 * a2) * g0 + e(150.0 * a1 * a1) * g3
             + e(300.0 * a4 * a1 + 225.0 * a2 * a2) * g1 + e(450.0 * a2 * a1) * g2) / e(d7)
          + (e(1050.0 * a4 * a1 * a1 + 1575.0 * a2 * a2 * a1) * g0
             + e(3150.0 * a1 * a1 * a2) * g1 + e(1050.0 * a1 ** 3) * g2) / e(d9)
          + (e(9450.0 * a1 ** 3 * a2) * g0 + e(4725.0 * a1 ** 4) * g1) / e(d11)
          + e(10395.0 * a1 ** 5 / d13) * g0)
    return np.stack([n0, n1, n2, n3, n4, n5], axis=-2)


def sob_term_grad_batch(x_cart, m: int, comp_h, comp_xi) -> np.ndarray:
    """Gradients of sob_term(q = |x|^m * comp_h, tau) against many pure-kernel
    components; shape (ncomp, 3).

    comp_h are component magnitudes, comp_xi their unit directions; the
    component exponent is fixed at 1 (wavelets are expanded into signed
    pure-kernel components by the caller).  Finite at x = 0.
    """
    x = np.asarray(x_cart, dtype=float)
    comp_h = np.asarray(comp_h, dtype=float)
    comp_xi = np.asarray(comp_xi, dtype=float)
    h = float(np.linalg.norm(x))
    q = h ** m * comp_h
    if h > 0.0:
        tau = np.clip(comp_xi @ (x / h), -1.0, 1.0)
    else:
        tau = np.ones_like(comp_h)
    comp_xc = comp_h[:, None] * comp_xi
    pow2 = 2.0 ** np.arange(6)
    if m == 1:
        # (tau - 2^n q) grad q + q grad tau == comp_xc - 2^n comp_h^2 x
        g = comp_xc[:, None, :] - (pow2[None, :] * comp_h[:, None] ** 2)[:, :, None] * x
    else:
        if h == 0.0:
            return np.zeros((comp_h.shape[0], 3))
        xi = x / h
        grad_q = 2.0 * comp_h[:, None] * x
        q_grad_t = comp_h[:, None] * (h * comp_xi - tau[:, None] * x)
        g = ((tau[:, None] - pow2[None, :] * q[:, None])[:, :, None] * grad_q[:, None, :]
             + q_grad_t[:, None, :])
    ladders = _ladder_grad_core(q, tau, g)
    return np.einsum("k,ckd->cd", SOB_WEIGHTS, ladders) / (64.0 * math.pi)


_COMPONENTS = {APK: ((1, 1.0),), APW: ((1, 1.0), (2, -1.0))}


def _pair_tau(x: BallPoint, xt: BallPoint) -> float:
    # tau is irrelevant when either center is the origin (q = 0); pick 1
    if x.h == 0.0 or xt.h == 0.0:
        return 1.0
    return min(1.0, max(-1.0, float(_xi(x) @ _xi(xt))))


def h2_kernel_inner(d1, d2) -> float:
    """H2 inner product of two kernel/wavelet dictionary elements."""
    comps1 = _COMPONENTS[type(d1)]
    comps2 = _COMPONENTS[type(d2)]
    tau = _pair_tau(d1.x, d2.x)
    total = 0.0
    for a, sa in comps1:
        for b, sb in comps2:
            total += sa * sb * float(sob_term(d1.x.h ** a * d2.x.h ** b, tau))
    return total


def h2_kernel_inner_grad(d1, d2) -> np.ndarray:
    """Gradient of h2_kernel_inner with respect to d1's center."""
    comps1 = _COMPONENTS[type(d1)]
    comps2 = _COMPONENTS[type(d2)]
    total = np.zeros(3)
    for a, sa in comps1:
        for b, sb in comps2:
            ctx = PairContext(d1.x, d2.x, m=a, mt=b)
            grads = ladder_grad(ctx)
            total += sa * sb * (SOB_WEIGHTS @ grads) / (64.0 * math.pi)
    return total


def h2_sh_norm(n: int) -> float:
    """Squared H2 norm of a fully normalized SH of degree n: (n + 0.5)^4."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    return (n + 0.5) ** 4


def h2_sh_kernel_inner(n: int, j: int, d) -> float:
    """H2 inner product of Y_{n,j} with a kernel or wavelet element."""
    if abs(j) > n:
        raise ValueError("order exceeds degree")
    h = d.x.h
    if isinstance(d, APK):
        radial = h ** n
    elif isinstance(d, APW):
        radial = h ** n - h ** (2 * n)
    else:
        raise TypeError("kernel or wavelet expected")
    if radial == 0.0:
        return 0.0
    return (n + 0.5) ** 4 * radial * sh_eval(n, j, d.x.dir)


def h2_sh_kernel_inner_grad(n: int, j: int, d, step: float = 1e-6) -> np.ndarray:
    """Gradient of h2_sh_kernel_inner with respect to the kernel center.

    The map x -> |x|^n Y_{n,j}(x/|x|) is a harmonic polynomial in x, so
    central differences on the Cartesian components are accurate far beyond
    the tolerances used downstream.
    """
    x0 = d.x.to_cartesian()
    kind = type(d)

    def val(p):
        bp = BallPoint.from_cartesian(p)
        return h2_sh_kernel_inner(n, j, kind(bp))

    g = np.zeros(3)
    for i in range(3):
        dp = np.zeros(3)
        dp[i] = step
        g[i] = (val(x0 + dp) - val(x0 - dp)) / (2.0 * step)
    return g
