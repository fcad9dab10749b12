"""The greedy solver: per iteration, score all spherical-harmonic
candidates exhaustively, learn kernel and wavelet centers over the ball,
pick the best element by the regularized quotient A^2/B, and update the
expansion, the residual and the Sobolev bookkeeping.

Candidate scoring is vectorized: SH columns are cached once per solve,
kernel seed columns likewise, and the current expansion is kept both as a
dense per-(n, j) Sobolev vector and as a signed list of pure-kernel
components so that <f_N, d> for any new candidate is a handful of closed
forms rather than a truncated series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import sobolev
from .basis import APK, APW, SH, Dictionary, sh_all, sh_index, sh_weighted_point
from .forward import DataSet, apply_element_raw
from .geometry import BallPoint, directions_to_cartesian, from_cartesian, reuter_with_min_points
from .optimize import Budget, Objective, SearchDomain, global_search, local_refine
from .sobolev import sob_term, sob_term_grad_batch

__all__ = [
    "SolverConfig",
    "SolverState",
    "Approximation",
    "HistoryRow",
    "objective",
    "weight",
    "learn_sh",
    "learn_kernel",
    "iterate",
    "solve",
]

_DEGENERATE_B = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1e-8
    max_iterations: int = 1600
    rde_threshold: float = 0.05
    sh_max_degree: int = 96
    learning: bool = True
    budget: Budget = field(default_factory=Budget)
    global_evals: int = 1000
    local_evals: int = 200
    seed_min_points: int = 123
    seed_radius: float = 0.94
    domain: SearchDomain = field(default_factory=SearchDomain)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("regularization parameter must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.seed_radius < 1.0:
            raise ValueError("seed radius must lie in the open ball")


@dataclass
class Approximation:
    """f_N = f_0 + sum alpha_n d_n; f_0 is identically zero by default."""

    terms: list = field(default_factory=list)  # (alpha, element)

    def evaluate(self, lon, t) -> np.ndarray:
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ones = np.ones_like(t)
        out = np.zeros_like(t)
        eta = directions_to_cartesian(lon, t)
        for alpha, d in self.terms:
            out += alpha * apply_element_raw(d, ones, lon, t, eta)
        return out


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    element: object
    alpha: float
    objective: float
    rde: float
    tikhonov: float


def _element_key(d):
    """Deterministic tie-break precedence: SH before APK before APW."""
    return {SH: 0, APK: 1, APW: 2}[type(d)]


class SolverState:
    """Residual, expansion and incremental Sobolev bookkeeping."""

    def __init__(self, ds: DataSet, cfg: SolverConfig, dictionary: Dictionary | None = None):
        self.ds = ds
        self.cfg = cfg
        L = cfg.sh_max_degree if dictionary is None else dictionary.sh_max_degree
        self.L = L
        self.residual = ds.y.copy()
        self.data_norm0 = float(np.linalg.norm(ds.y))
        if self.data_norm0 == 0.0:
            raise ValueError("data vector is identically zero")
        self.terms: list = []
        self.history: list = []
        self.fnorm2 = 0.0
        self.iteration = 0
        self.status = "running"

        nflat = (L + 1) ** 2
        degrees = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
        self.flat_degrees = degrees
        self.wt4 = (degrees + 0.5) ** 4
        # cached SH columns of the discretized operator
        from .basis import sh_matrix
        self.Y = sh_matrix(L, ds.lon, ds.t, ds.sigma)
        self.colnorm2 = np.einsum("ij,ij->j", self.Y, self.Y)
        self.w_sh = np.zeros(nflat)   # accumulated weights per (n, j)
        self.g_sh = np.zeros(nflat)   # <f_N, Y_{n,j}>_{H2}
        self._cw_cache = None         # w_sh * wt4 as a plain list for scalar loops
        # signed pure-kernel components of the expansion's kernel part
        self.comp_h = np.zeros(0)
        self.comp_xi = np.zeros((0, 3))
        self.comp_coef = np.zeros(0)

        # kernel/wavelet seed grid at fixed radius
        if dictionary is not None and dictionary.kernel_seeds:
            seeds = dictionary.kernel_seeds
        else:
            grid = reuter_with_min_points(cfg.seed_min_points)
            seeds = tuple(BallPoint(cfg.seed_radius, d) for d in grid.points)
        self.seeds = seeds
        self.seed_xi = np.array([s.to_cartesian() / s.h for s in seeds])
        self.seed_h = np.array([s.h for s in seeds])
        self.seed_lon = np.array([s.dir.lon for s in seeds])
        self.seed_t = np.array([s.dir.t for s in seeds])
        ones = np.ones(len(seeds))
        self.seed_cols = {}
        self.seed_colnorm2 = {}
        self.seed_dnorm2 = {}
        for fam in (APK, APW):
            cols = np.stack([apply_element_raw(fam(s), ds.sigma, ds.lon, ds.t, ds.eta_cart)
                             for s in seeds], axis=1)
            self.seed_cols[fam] = cols
            self.seed_colnorm2[fam] = np.einsum("ij,ij->j", cols, cols)
            self.seed_dnorm2[fam] = np.array([_element_h2_norm2(fam, h) for h in self.seed_h])
        self.seed_shvals = sh_all(L, self.seed_lon, self.seed_t)
        self.seed_hn = self.seed_h[:, None] ** self.flat_degrees[None, :].astype(float)
        self.learning = cfg.learning if dictionary is None else (cfg.learning and dictionary.learning_enabled)

    # -- inner products against the current expansion -----------------------

    def fn_dot_sh_all(self) -> np.ndarray:
        return self.g_sh

    def _cw(self):
        if self._cw_cache is None:
            self._cw_cache = (self.w_sh * self.wt4).tolist()
        return self._cw_cache

    def fn_dot_kernel(self, fam, h: float, lon: float, t: float) -> float:
        """<f_N, d>_H2 for a kernel/wavelet candidate at center (h, dir)."""
        c = self._cw()
        val = sh_weighted_point(c, self.L, lon, t, h)
        if fam is APW:
            val -= sh_weighted_point(c, self.L, lon, t, h * h)
        if self.comp_h.shape[0]:
            xi = directions_to_cartesian(lon, t)
            tau = np.clip(self.comp_xi @ xi, -1.0, 1.0)
            q1 = self.comp_h * h
            val += float(np.dot(self.comp_coef, sob_term(q1, tau)))
            if fam is APW:
                val -= float(np.dot(self.comp_coef, sob_term(self.comp_h * h * h, tau)))
        return val

    def fn_dot_kernel_grad(self, fam, x_cart) -> np.ndarray:
        """Gradient of <f_N, d(x)>_H2 with respect to the candidate center."""
        g = _fd_grad(lambda p: self._fn_dot_sh_part(fam, p), np.asarray(x_cart, dtype=float))
        if self.comp_h.shape[0]:
            g = g + self.comp_coef @ sob_term_grad_batch(x_cart, 1, self.comp_h, self.comp_xi)
            if fam is APW:
                g = g - self.comp_coef @ sob_term_grad_batch(x_cart, 2, self.comp_h, self.comp_xi)
        return g

    def _fn_dot_sh_part(self, fam, x_cart) -> float:
        x = np.asarray(x_cart, dtype=float)
        h = float(np.linalg.norm(x))
        c = self._cw()
        if h == 0.0:
            # only degree 0 survives for APK; identically zero for APW
            return c[0] / math.sqrt(4.0 * math.pi) if fam is APK else 0.0
        t = min(1.0, max(-1.0, x[2] / h))
        lon = math.atan2(x[1], x[0])
        val = sh_weighted_point(c, self.L, lon, t, h)
        if fam is APW:
            val -= sh_weighted_point(c, self.L, lon, t, h * h)
        return val

    def fn_dot_seeds(self, fam) -> np.ndarray:
        """<f_N, seed>_H2 for every seed of the family; vectorized."""
        radial = self.seed_hn if fam is APK else self.seed_hn - self.seed_hn ** 2
        vals = (self.seed_shvals * radial) @ (self.w_sh * self.wt4)
        if self.comp_h.shape[0]:
            tau = np.clip(self.comp_xi @ self.seed_xi.T, -1.0, 1.0)  # (ncomp, nseed)
            q1 = np.outer(self.comp_h, self.seed_h)
            vals = vals + self.comp_coef @ sob_term(q1, tau)
            if fam is APW:
                vals = vals - self.comp_coef @ sob_term(q1 * self.seed_h[None, :], tau)
        return vals

    # -- expansion update ----------------------------------------------------

    def add_term(self, element, alpha: float, column: np.ndarray, obj_value: float,
                 fn_dot_d: float, dnorm2: float):
        self.residual = self.residual - alpha * column
        self.fnorm2 += 2.0 * alpha * fn_dot_d + alpha * alpha * dnorm2
        if isinstance(element, SH):
            idx = sh_index(element.n, element.j)
            self.w_sh[idx] += alpha
            self.g_sh[idx] += alpha * self.wt4[idx]
        else:
            h = element.x.h
            d = element.x.dir
            shvec = sh_all(self.L, np.full(1, d.lon), np.full(1, d.t))[0]
            fam = type(element)
            radial = _radial_factor(fam, h, self.flat_degrees)
            self.g_sh += alpha * self.wt4 * radial * shvec
            xi = directions_to_cartesian(d.lon, d.t)
            if fam is APK:
                self.comp_h = np.append(self.comp_h, h)
                self.comp_xi = np.vstack([self.comp_xi, xi])
                self.comp_coef = np.append(self.comp_coef, alpha)
            else:
                self.comp_h = np.append(self.comp_h, [h, h * h])
                self.comp_xi = np.vstack([self.comp_xi, xi, xi])
                self.comp_coef = np.append(self.comp_coef, [alpha, -alpha])
        self._cw_cache = None
        self.terms.append((alpha, element))
        self.iteration += 1
        rde = float(np.linalg.norm(self.residual)) / self.data_norm0
        self.history.append(HistoryRow(self.iteration, element, alpha, obj_value, rde,
                                       self.tikhonov()))

    # -- diagnostics ---------------------------------------------------------

    def rde(self) -> float:
        return float(np.linalg.norm(self.residual)) / self.data_norm0

    def tikhonov(self) -> float:
        return float(self.residual @ self.residual) + self.cfg.lam * self.fnorm2

    def approximation(self) -> Approximation:
        return Approximation(terms=list(self.terms))

    def recompute_residual(self) -> np.ndarray:
        r = self.ds.y.copy()
        for alpha, d in self.terms:
            r = r - alpha * apply_element_raw(d, self.ds.sigma, self.ds.lon, self.ds.t,
                                              self.ds.eta_cart)
        return r

    def recompute_fnorm2(self) -> float:
        """O(N^2) pairwise recomputation of the squared H2 norm."""
        total = 0.0
        for a1, d1 in self.terms:
            for a2, d2 in self.terms:
                total += a1 * a2 * _pair_inner(d1, d2)
        return total


def _radial_factor(fam, h: float, degrees: np.ndarray) -> np.ndarray:
    hn = h ** degrees.astype(float)
    if fam is APK:
        return hn
    return hn - hn * hn


def _element_h2_norm2(fam, h: float) -> float:
    if fam is APK:
        return float(sob_term(h * h, 1.0))
    return float(sob_term(h * h, 1.0) - 2.0 * sob_term(h ** 3, 1.0) + sob_term(h ** 4, 1.0))


def _pair_inner(d1, d2) -> float:
    if isinstance(d1, SH) and isinstance(d2, SH):
        if (d1.n, d1.j) == (d2.n, d2.j):
            return sobolev.h2_sh_norm(d1.n)
        return 0.0
    if isinstance(d1, SH):
        return sobolev.h2_sh_kernel_inner(d1.n, d1.j, d2)
    if isinstance(d2, SH):
        return sobolev.h2_sh_kernel_inner(d2.n, d2.j, d1)
    return sobolev.h2_kernel_inner(d1, d2)


def _fd_grad(f, x, step: float = 1e-6) -> np.ndarray:
    g = np.zeros(3)
    for i in range(3):
        dp = np.zeros(3)
        dp[i] = step
        g[i] = (f(x + dp) - f(x - dp)) / (2.0 * step)
    return g


# --- candidate scoring and selection ----------------------------------------

def objective(d, state: SolverState, lam: float):
    """The quotient value A^2/B with its building blocks A and B."""
    column = apply_element_raw(d, state.ds.sigma, state.ds.lon, state.ds.t, state.ds.eta_cart)
    if isinstance(d, SH):
        fn_dot = float(state.g_sh[sh_index(d.n, d.j)]) if d.n <= state.L else _pair_sum(state, d)
        dnorm2 = sobolev.h2_sh_norm(d.n)
    else:
        fn_dot = state.fn_dot_kernel(type(d), d.x.h, d.x.dir.lon, d.x.dir.t)
        dnorm2 = _element_h2_norm2(type(d), d.x.h)
    a = float(state.residual @ column) - lam * fn_dot
    b = float(column @ column) + lam * dnorm2
    if b <= _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0):
        raise ValueError("degenerate candidate")
    return a * a / b, a, b


def _pair_sum(state, d):
    return sum(alpha * _pair_inner(dn, d) for alpha, dn in state.terms)


def weight(a: float, b: float) -> float:
    """alpha = A / B."""
    if b <= 0:
        raise ValueError("B must be positive")
    return a / b


@dataclass
class _Candidate:
    element: object
    value: float
    a: float
    b: float
    column: np.ndarray
    fn_dot: float
    dnorm2: float
    warnings: tuple = ()


def learn_sh(state: SolverState, cfg: SolverConfig) -> _Candidate:
    """Exhaustive scan over all (n, j) with n <= the dictionary degree."""
    a_vec = state.Y.T @ state.residual - cfg.lam * state.g_sh
    b_vec = state.colnorm2 + cfg.lam * state.wt4
    scale = _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0)
    values = np.where(b_vec > scale, a_vec * a_vec / np.maximum(b_vec, scale), -np.inf)
    idx = int(np.argmax(values))  # first max: lowest (n, j) wins ties
    n = int(math.isqrt(idx))
    j = idx - n * n - n
    d = SH(n, j)
    return _Candidate(d, float(values[idx]), float(a_vec[idx]), float(b_vec[idx]),
                      state.Y[:, idx].copy(), float(state.g_sh[idx]), float(state.wt4[idx]))


def _kernel_candidate_at(state: SolverState, cfg: SolverConfig, fam, x_cart,
                         warnings=()) -> _Candidate:
    bp = BallPoint.from_cartesian(np.asarray(x_cart, dtype=float))
    d = fam(bp)
    column = apply_element_raw(d, state.ds.sigma, state.ds.lon, state.ds.t, state.ds.eta_cart)
    fn_dot = state.fn_dot_kernel(fam, bp.h, bp.dir.lon, bp.dir.t)
    dnorm2 = _element_h2_norm2(fam, bp.h)
    a = float(state.residual @ column) - cfg.lam * fn_dot
    b = float(column @ column) + cfg.lam * dnorm2
    scale = _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0)
    value = a * a / b if b > scale else -math.inf
    return _Candidate(d, value, a, b, column, fn_dot, dnorm2, tuple(warnings))


def learn_kernel(state: SolverState, cfg: SolverConfig, fam) -> _Candidate:
    """Best kernel/wavelet candidate: seed scan plus learned center.

    The continuous stage maximizes the quotient via the dividing-rectangles
    search and then refines both the global incumbent and the best seed by
    projected gradient ascent; the best of everything wins.
    """
    # seed scan, fully vectorized
    a_vec = state.seed_cols[fam].T @ state.residual - cfg.lam * state.fn_dot_seeds(fam)
    b_vec = state.seed_colnorm2[fam] + cfg.lam * state.seed_dnorm2[fam]
    scale = _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0)
    values = np.where(b_vec > scale, a_vec * a_vec / np.maximum(b_vec, scale), -np.inf)
    s_idx = int(np.argmax(values))
    best_seed_x = state.seed_h[s_idx] * state.seed_xi[s_idx]
    best = _kernel_candidate_at(state, cfg, fam, best_seed_x)
    if not state.learning:
        return best

    def value_fn(x):
        return _kernel_objective_value(state, cfg, fam, x)

    def value_and_grad(x):
        return _kernel_objective_grad(state, cfg, fam, x)

    obj = Objective(value_fn, value_and_grad)
    warnings = []
    gbudget = replace(cfg.budget, max_evals=min(cfg.global_evals, cfg.budget.max_evals))
    try:
        gx, gval, _ = global_search(obj, cfg.domain, gbudget)
        starts = [gx, best_seed_x]
    except Exception as exc:  # pragma: no cover - defensive fallback
        warnings.append(f"global stage failed: {exc}")
        starts = [best_seed_x]
    lbudget = replace(cfg.budget, max_evals=min(cfg.local_evals, cfg.budget.max_evals))
    for x0 in starts:
        try:
            rx, rval, _, w = local_refine(obj, x0, cfg.domain, lbudget)
            warnings.extend(w)
            cand = _kernel_candidate_at(state, cfg, fam, rx, warnings=tuple(warnings))
            if cand.value > best.value:
                best = cand
        except Exception as exc:  # pragma: no cover - defensive fallback
            warnings.append(f"refinement failed: {exc}")
    if warnings:
        best = replace_candidate_warnings(best, tuple(warnings))
    return best


def replace_candidate_warnings(c: _Candidate, warnings) -> _Candidate:
    return _Candidate(c.element, c.value, c.a, c.b, c.column, c.fn_dot, c.dnorm2, warnings)


def _kernel_objective_value(state, cfg, fam, x) -> float:
    x = np.asarray(x, dtype=float)
    h = float(np.linalg.norm(x))
    if h >= 1.0 - cfg.domain.delta + 1e-15:
        return -math.inf
    bp = BallPoint.from_cartesian(x)
    d = fam(bp)
    ds = state.ds
    column = apply_element_raw(d, ds.sigma, ds.lon, ds.t, ds.eta_cart)
    fn_dot = state.fn_dot_kernel(fam, bp.h, bp.dir.lon, bp.dir.t)
    a = float(state.residual @ column) - cfg.lam * fn_dot
    b = float(column @ column) + cfg.lam * _element_h2_norm2(fam, bp.h)
    scale = _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0)
    if b <= scale:
        return -math.inf
    return a * a / b


def _kernel_objective_grad(state, cfg, fam, x):
    from .basis import upward_grad_x_batch
    x = np.asarray(x, dtype=float)
    bp = BallPoint.from_cartesian(x)
    d = fam(bp)
    ds = state.ds
    column = apply_element_raw(d, ds.sigma, ds.lon, ds.t, ds.eta_cart)
    col_grad = upward_grad_x_batch(d, ds.sigma, ds.eta_cart)
    fn_dot = state.fn_dot_kernel(fam, bp.h, bp.dir.lon, bp.dir.t)
    a = float(state.residual @ column) - cfg.lam * fn_dot
    dnorm2 = _element_h2_norm2(fam, bp.h)
    b = float(column @ column) + cfg.lam * dnorm2
    scale = _DEGENERATE_B * max(state.data_norm0 ** 2, 1.0)
    if b <= scale:
        return -math.inf, np.zeros(3)
    da = col_grad.T @ state.residual - cfg.lam * state.fn_dot_kernel_grad(fam, x)
    # d/dx ||d||^2 = 2 * (partial of <d(x), d(y)> in x at y = x)
    db = 2.0 * (col_grad.T @ column) + cfg.lam * 2.0 * _self_norm_grad(fam, d)
    value = a * a / b
    grad = (2.0 * a * da * b - a * a * db) / (b * b)
    return value, grad


def _self_norm_grad(fam, d) -> np.ndarray:
    return sobolev.h2_kernel_inner_grad(d, d)


def iterate(state: SolverState, cfg: SolverConfig) -> SolverState:
    """One greedy step: pick the best candidate across families and update."""
    cands = [learn_sh(state, cfg),
             learn_kernel(state, cfg, APK),
             learn_kernel(state, cfg, APW)]
    best = None
    for c in cands:  # list order implements the SH < APK < APW tie precedence
        if best is None or c.value > best.value:
            best = c
    stall_scale = 1e-14 * max(state.tikhonov(), 1e-300)
    if not math.isfinite(best.value) or best.value <= stall_scale:
        state.status = "stalled"
        return state
    alpha = weight(best.a, best.b)
    state.add_term(best.element, alpha, best.column, best.value, best.fn_dot, best.dnorm2)
    return state


def solve(cfg: SolverConfig, dataset: DataSet, dictionary: Dictionary | None = None):
    """Run the greedy iteration to the discrepancy threshold or the budget.

    Returns (approximation, history, status); status is one of
    "discrepancy", "max_iterations", "stalled".
    """
    state = SolverState(dataset, cfg, dictionary)
    status = "max_iterations"
    if state.rde() <= cfg.rde_threshold:
        status = "discrepancy"
    else:
        while state.iteration < cfg.max_iterations:
            iterate(state, cfg)
            if state.status == "stalled":
                status = "stalled"
                break
            if state.rde() <= cfg.rde_threshold:
                status = "discrepancy"
                break
    return state.approximation(), list(state.history), status
