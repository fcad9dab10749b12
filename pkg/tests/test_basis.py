import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravpursuit.basis import (
    APK,
    APW,
    SH,
    Dictionary,
    apk_eval,
    apk_series,
    apw_eval,
    apw_series,
    assoc_legendre,
    element_eval,
    legendre,
    sh_all,
    sh_eval,
    sh_index,
    sh_single,
    sh_weighted_point,
    upward_eval,
    upward_grad_x,
)
from gravpursuit.geometry import BallPoint, Direction, to_cartesian

FOUR_PI = 4.0 * math.pi


def random_direction(rng):
    return Direction(rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1))


def random_ballpoint(rng, lo=0.05, hi=0.95):
    return BallPoint(rng.uniform(lo, hi), random_direction(rng))


class TestLegendre:
    def test_degree_zero(self):
        assert legendre(0, 0.3) == 1.0

    def test_degree_one(self):
        assert legendre(1, 0.3) == 0.3

    def test_degree_two(self):
        assert abs(legendre(2, 0.5) - (-0.125)) < 1e-15

    @given(st.integers(0, 50), st.floats(-1, 1))
    def test_bounded(self, n, t):
        assert abs(legendre(n, t)) <= 1.0 + 1e-12

    def test_vectorized(self):
        t = np.linspace(-1, 1, 7)
        np.testing.assert_allclose(legendre(2, t), (3 * t * t - 1) / 2, atol=1e-14)


class TestAssocLegendre:
    def test_p11_at_zero(self):
        assert abs(assoc_legendre(1, 1, 0.0) - 1.0) < 1e-15

    def test_m_zero_is_legendre(self):
        for n in range(6):
            assert abs(assoc_legendre(n, 0, 0.37) - legendre(n, 0.37)) < 1e-14

    def test_p21(self):
        # P_{2,1}(t) = 3 t sqrt(1 - t^2)
        assert abs(assoc_legendre(2, 1, 0.5) - 3 * 0.5 * math.sqrt(0.75)) < 1e-12


class TestShIndex:
    def test_layout(self):
        assert sh_index(0, 0) == 0
        assert sh_index(1, -1) == 1
        assert sh_index(1, 0) == 2
        assert sh_index(1, 1) == 3
        assert sh_index(2, -2) == 4


class TestShEval:
    def test_constant(self):
        assert abs(sh_eval(0, 0, Direction(1.0, 0.2)) - 1 / math.sqrt(FOUR_PI)) < 1e-15

    def test_degree_one_pole(self):
        assert abs(sh_eval(1, 0, Direction(0.0, 1.0)) - math.sqrt(3 / FOUR_PI)) < 1e-14

    def test_quadrature_norm(self):
        # int Y_{2,1}^2 domega = 1 via Gauss-Legendre x trapezoid
        nodes, weights = np.polynomial.legendre.leggauss(64)
        lon = np.linspace(0, 2 * math.pi, 128, endpoint=False)
        total = 0.0
        for t, w in zip(nodes, weights):
            vals = np.array([sh_eval(2, 1, Direction(p, t)) for p in lon])
            total += w * (vals ** 2).sum() * (2 * math.pi / 128)
        assert abs(total - 1.0) < 1e-9

    def test_sh_all_consistency(self):
        rng = np.random.default_rng(2)
        lon = rng.uniform(0, 2 * math.pi, 5)
        t = rng.uniform(-1, 1, 5)
        block = sh_all(6, lon, t)
        for n in range(7):
            for j in range(-n, n + 1):
                vals = np.array([sh_eval(n, j, Direction(l, tt)) for l, tt in zip(lon, t)])
                np.testing.assert_allclose(block[:, sh_index(n, j)], vals, atol=1e-12)

    def test_sh_single_matches_block(self):
        rng = np.random.default_rng(3)
        lon = rng.uniform(0, 2 * math.pi, 10)
        t = rng.uniform(-1, 1, 10)
        block = sh_all(8, lon, t)
        for n, j in [(0, 0), (3, -2), (8, 8), (5, 0)]:
            np.testing.assert_allclose(sh_single(n, j, lon, t),
                                       block[:, sh_index(n, j)], rtol=1e-12, atol=1e-14)

    def test_sh_weighted_point(self):
        rng = np.random.default_rng(4)
        L = 12
        c = rng.normal(size=(L + 1) ** 2)
        lon, t, h = 1.3, -0.4, 0.8
        degrees = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
        ref = float(sh_all(L, [lon], [t])[0] @ (c * h ** degrees))
        assert abs(sh_weighted_point(c.tolist(), L, lon, t, h) - ref) < 1e-12 * abs(ref)


class TestAdditionTheorem:
    def test_bulk(self):
        rng = np.random.default_rng(17)
        npair = 500
        lon = rng.uniform(0, 2 * math.pi, (2, npair))
        t = rng.uniform(-1, 1, (2, npair))
        block_xi = sh_all(30, lon[0], t[0])
        block_eta = sh_all(30, lon[1], t[1])
        u = np.sqrt(1 - t * t)
        tau = (u[0] * u[1] * np.cos(lon[0] - lon[1]) + t[0] * t[1])
        worst = 0.0
        for k in range(npair):
            n = int(rng.integers(0, 31))
            cols = slice(n * n, (n + 1) ** 2)
            s = float(block_xi[k, cols] @ block_eta[k, cols])
            worst = max(worst, abs(s - (2 * n + 1) / FOUR_PI * legendre(n, tau[k])))
        assert worst <= 1e-10


class TestKernels:
    def test_apk_origin(self):
        assert abs(apk_eval(BallPoint(0.0), Direction(0.3, 0.4)) - 1 / FOUR_PI) < 1e-15

    def test_apk_near_coincident(self):
        x = BallPoint(0.9, Direction(0.0, 0.0))
        val = apk_eval(x, Direction(0.0, 0.0))
        expected = (1 - 0.81) / (FOUR_PI * (1 + 0.81 - 1.8) ** 1.5)
        assert abs(val - expected) < 1e-12 * expected

    def test_apk_series(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            x = random_ballpoint(rng, 0.0, 0.97)
            eta = random_direction(rng)
            closed = apk_eval(x, eta)
            series = apk_series(x, eta)
            assert abs(closed - series) <= 1e-10 * max(1.0, abs(series))

    def test_apw_origin_zero(self):
        assert apw_eval(BallPoint(0.0), Direction(1.0, 0.3)) == 0.0

    def test_apw_is_kernel_difference(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            x = random_ballpoint(rng)
            eta = random_direction(rng)
            inner = BallPoint(x.h * x.h, x.dir)
            diff = apk_eval(x, eta) - apk_eval(inner, eta)
            assert apw_eval(x, eta) == pytest.approx(diff, rel=1e-12, abs=1e-15)

    def test_apw_series(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            x = random_ballpoint(rng, 0.0, 0.97)
            eta = random_direction(rng)
            closed = apw_eval(x, eta)
            series = apw_series(x, eta)
            assert abs(closed - series) <= 1e-10 * max(1.0, abs(series))


class TestUpwardEval:
    def test_sh_surface(self):
        eta = Direction(0.7, -0.2)
        assert upward_eval(SH(5, 2), 1.0, eta) == sh_eval(5, 2, eta)

    def test_sh_scaling(self):
        eta = Direction(0.7, -0.2)
        assert abs(upward_eval(SH(3, 1), 2.0, eta) -
                   sh_eval(3, 1, eta) / 16.0) < 1e-15

    def test_apk_origin_sigma_two(self):
        assert abs(upward_eval(APK(BallPoint(0.0)), 2.0, Direction(0, 0.5)) -
                   1 / (8 * math.pi)) < 1e-16

    def test_apk_series_with_sigma(self):
        # term-by-term series sum (2n+1)/(4pi) h^n sigma^{-n-1} P_n
        rng = np.random.default_rng(37)
        for _ in range(10):
            x = random_ballpoint(rng)
            eta = random_direction(rng)
            sigma = rng.uniform(1.02, 2.0)
            tau = float(x.to_cartesian() / x.h @ to_cartesian(eta))
            total, n, term = 0.0, 0, 1.0
            while True:
                term = (2 * n + 1) / FOUR_PI * x.h ** n * sigma ** (-n - 1) * legendre(n, tau)
                total += term
                n += 1
                if (2 * n + 1) / FOUR_PI * (x.h / sigma) ** n / sigma < 1e-16:
                    break
            assert abs(upward_eval(APK(x), sigma, eta) - total) <= 1e-10

    def test_sigma_monotone_smoothing(self):
        x = BallPoint(0.8, Direction(0.4, 0.3))
        vals = [upward_eval(APK(x), s, x.dir) for s in (1.05, 1.1, 1.5)]
        assert vals[0] > vals[1] > vals[2] > 0

    def test_element_eval_delegates(self):
        eta = Direction(2.0, 0.1)
        x = BallPoint(0.5, Direction(1.0, -0.5))
        for d in (SH(4, -3), APK(x), APW(x)):
            assert element_eval(d, eta) == upward_eval(d, 1.0, eta)

    def test_sigma_zero_rejected(self):
        with pytest.raises(ValueError):
            upward_eval(SH(1, 0), 0.0, Direction(0, 0))


class TestUpwardGrad:
    def test_fd_check(self):
        rng = np.random.default_rng(41)
        step = 1e-6
        for _ in range(100):
            fam = APK if rng.random() < 0.5 else APW
            x = random_ballpoint(rng, 0.05, 0.9)
            eta = random_direction(rng)
            sigma = rng.uniform(1.01, 1.5)
            g = upward_grad_x(fam(x), sigma, eta)
            xc = x.to_cartesian()
            fd = np.zeros(3)
            for i in range(3):
                dp = np.zeros(3)
                dp[i] = step
                fp = upward_eval(fam(BallPoint.from_cartesian(xc + dp)), sigma, eta)
                fm = upward_eval(fam(BallPoint.from_cartesian(xc - dp)), sigma, eta)
                fd[i] = (fp - fm) / (2 * step)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(g - fd) / denom <= 1e-5

    def test_origin_finite(self):
        for fam in (APK, APW):
            g = upward_grad_x(fam(BallPoint(0.0)), 1.3, Direction(0.2, 0.6))
            assert np.all(np.isfinite(g))

    def test_origin_apk_one_sided_fd(self):
        eta = Direction(0.9, 0.2)
        sigma = 1.2
        g = upward_grad_x(APK(BallPoint(0.0)), sigma, eta)
        step = 1e-7
        fd = np.zeros(3)
        for i in range(3):
            dp = np.zeros(3)
            dp[i] = step
            fp = upward_eval(APK(BallPoint.from_cartesian(dp)), sigma, eta)
            fm = upward_eval(APK(BallPoint.from_cartesian(-dp)), sigma, eta)
            fd[i] = (fp - fm) / (2 * step)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


class TestDictionary:
    def test_size(self):
        seeds = tuple(BallPoint(0.94, Direction(0.1 * k, 0.0)) for k in range(5))
        d = Dictionary(sh_max_degree=3, kernel_seeds=seeds)
        assert d.size() == 16 + 10

    def test_full_scale_size(self):
        # degree 96 band plus two kernel families over 123 seeds
        assert 97 ** 2 + 2 * 123 == 9655

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            Dictionary(sh_max_degree=-1, kernel_seeds=())


class TestShBounds:
    def test_invalid_order(self):
        with pytest.raises(ValueError):
            SH(2, 3)
        with pytest.raises(ValueError):
            SH(-1, 0)
