"""Two-stage maximization over the closed ball used by the learning step:
a deterministic dividing-rectangles global search on the bounding box,
then projected gradient ascent under the norm constraint.

Both stages are fully deterministic: rectangle processing order is fixed
by creation index and the line search uses a fixed shrink/expand schedule.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["SearchDomain", "Budget", "Objective", "global_search", "local_refine"]


@dataclass(frozen=True)
class SearchDomain:
    """The ball |x| <= 1 - delta inside the box [-(1-delta), 1-delta]^3."""

    delta: float = 1e-8

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def radius(self) -> float:
        return 1.0 - self.delta

    def feasible(self, x) -> bool:
        return float(np.linalg.norm(x)) <= self.radius

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        if r <= self.radius:
            return x
        return x * (self.radius / r)


@dataclass(frozen=True)
class Budget:
    max_evals: int = 10_000
    max_seconds: float = 600.0
    abs_tol_f: float = 1e-8
    abs_tol_x: float = 1e-8

    def __post_init__(self):
        if min(self.max_evals, self.max_seconds, self.abs_tol_f, self.abs_tol_x) <= 0:
            raise ValueError("budget fields must be positive")


@dataclass
class Objective:
    """Maximization target: a pure value callable plus optional
    value-and-gradient callable."""

    value: Callable[[np.ndarray], float]
    value_and_grad: Optional[Callable[[np.ndarray], tuple]] = None


@dataclass
class _Rect:
    center: np.ndarray
    levels: np.ndarray  # per-dimension trisection depth
    f: float
    index: int

    def half_diag(self) -> float:
        sides = 3.0 ** (-self.levels.astype(float))
        return 0.5 * float(np.linalg.norm(sides))


_INFEASIBLE = -math.inf


def global_search(obj: Objective, dom: SearchDomain, budget: Budget):
    """Deterministic DIRECT-style maximization over the ball.

    Trisects potentially optimal rectangles of the bounding box; centers
    outside the ball score -inf and are kept only as partitions.  Returns
    (best_x, best_value, evals_used).
    """
    if budget.max_evals < 1:
        raise ValueError("zero budget")
    t0 = time.monotonic()
    r = dom.radius
    evals = 0

    def feval(u):
        # u in unit box [0,1]^3 -> ball coordinates
        nonlocal evals
        x = (2.0 * u - 1.0) * r
        if not dom.feasible(x):
            return _INFEASIBLE
        evals += 1
        return float(obj.value(x))

    center = np.full(3, 0.5)
    f0 = feval(center)
    best_x, best_f = (2.0 * center - 1.0) * r, f0
    rects = [_Rect(center, np.zeros(3, dtype=int), f0, 0)]
    counter = 1
    eps = 1e-4

    while evals < budget.max_evals and time.monotonic() - t0 < budget.max_seconds:
        po = _potentially_optimal(rects, best_f, eps)
        if not po:
            break
        progressed = False
        for rect in po:
            if evals >= budget.max_evals or time.monotonic() - t0 > budget.max_seconds:
                break
            lmin = int(rect.levels.min())
            dims = [i for i in range(3) if rect.levels[i] == lmin]
            delta = 3.0 ** (-(lmin + 1))
            samples = []
            for i in dims:
                for sgn in (1.0, -1.0):
                    u = rect.center.copy()
                    u[i] += sgn * delta
                    fv = feval(u)
                    samples.append((i, sgn, u, fv))
                    x = (2.0 * u - 1.0) * r
                    if fv > best_f:
                        best_f, best_x = fv, x
                    if evals >= budget.max_evals:
                        break
                if evals >= budget.max_evals:
                    break
            progressed = True
            # divide: best dimensions get the widest pieces first
            dim_best = {}
            for i, sgn, u, fv in samples:
                dim_best[i] = max(dim_best.get(i, _INFEASIBLE), fv)
            order = sorted(dim_best.keys(), key=lambda i: (-dim_best[i], i))
            for i in order:
                rect.levels = rect.levels.copy()
                rect.levels[i] += 1
                for ii, sgn, u, fv in samples:
                    if ii == i:
                        rects.append(_Rect(u, rect.levels.copy(), fv, counter))
                        counter += 1
        if not progressed:
            break
    return best_x, best_f, evals


def _potentially_optimal(rects, best_f, eps):
    """Lower-hull selection on (size, value) with the usual eps guard."""
    by_size = {}
    for rect in rects:
        d = round(rect.half_diag(), 15)
        cur = by_size.get(d)
        if cur is None or rect.f > cur.f or (rect.f == cur.f and rect.index < cur.index):
            by_size[d] = rect
    pts = [(d, by_size[d]) for d in sorted(by_size) if by_size[d].f != _INFEASIBLE]
    if not pts:
        return []
    # rect i is potentially optimal if some rate constant K >= 0 makes
    # f_i + K d_i at least as good as every other rect and promises a
    # nontrivial improvement on the incumbent; the largest feasible rect
    # always qualifies (K unbounded), so the search cannot stall
    scale = max(abs(best_f), 1e-300)
    out = []
    for i, (d_i, r_i) in enumerate(pts):
        k_hi = math.inf
        k_lo = 0.0
        for j, (d_j, r_j) in enumerate(pts):
            if j == i:
                continue
            if d_j > d_i:
                k_hi = min(k_hi, (r_i.f - r_j.f) / (d_j - d_i))
            else:
                k_lo = max(k_lo, (r_j.f - r_i.f) / (d_i - d_j))
        if k_hi < k_lo:
            continue
        if not math.isfinite(k_hi) or r_i.f + k_hi * d_i >= best_f + eps * scale:
            out.append(r_i)
    return out


def local_refine(obj: Objective, x0, dom: SearchDomain, budget: Budget):
    """Projected gradient ascent with backtracking from a feasible start.

    Monotone by construction; stops on the absolute function/step
    tolerances or budget exhaustion.  Returns (x, value, evals_used,
    warnings).
    """
    warnings = []
    x = np.asarray(x0, dtype=float)
    if not dom.feasible(x):
        x = dom.project(x)
        warnings.append("infeasible start projected to boundary")
    if obj.value_and_grad is None:
        raise ValueError("local refinement needs a gradient")
    t0 = time.monotonic()
    evals = 0

    def fg(p):
        nonlocal evals
        evals += 1
        v, g = obj.value_and_grad(p)
        return float(v), np.asarray(g, dtype=float)

    f, g = fg(x)
    step = 1.0
    while evals < budget.max_evals and time.monotonic() - t0 < budget.max_seconds:
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            break
        improved = False
        s = step
        for _ in range(50):
            cand = dom.project(x + s * g)
            dx = cand - x
            if float(np.linalg.norm(dx)) < 1e-18:
                break
            fc, gc = fg(cand)
            if fc >= f + 1e-4 * float(g @ dx):
                dxn = float(np.linalg.norm(dx))
                df = fc - f
                x, f, g = cand, fc, gc
                step = min(s * 2.0, 1e6)
                improved = True
                if df <= budget.abs_tol_f or dxn <= budget.abs_tol_x:
                    return x, f, evals, warnings
                break
            s *= 0.5
            if evals >= budget.max_evals:
                break
        if not improved:
            break
    return x, f, evals, warnings
