import math

import numpy as np
import pytest

from gravpursuit.basis import APK, APW, SH, sh_eval
from gravpursuit.forward import (
    CoefficientModel,
    DataSet,
    NoiseSpec,
    apply_element,
    apply_element_grad,
    generate_dataset,
    synthesize,
    synthesize_batch,
)
from gravpursuit.geometry import BallPoint, Direction

FOUR_PI = 4.0 * math.pi


def small_dataset(rng, n=50):
    return DataSet(sigma=rng.uniform(1.05, 1.2, n),
                   lon=rng.uniform(0, 2 * math.pi, n),
                   t=rng.uniform(-1, 1, n),
                   y=rng.normal(size=n))


class TestCoefficientModel:
    def test_max_degree_inferred(self):
        m = CoefficientModel({(3, 0): 1.0, (7, -5): 2.0})
        assert m.max_degree == 7

    def test_order_bound(self):
        with pytest.raises(ValueError):
            CoefficientModel({(2, 3): 1.0})

    def test_degree_orders(self):
        m = CoefficientModel({(3, 0): 1.0, (3, -1): 2.0, (4, 4): 3.0})
        assert m.degree_orders(3) == [(-1, 2.0), (0, 1.0)]


class TestSynthesize:
    def test_single_coefficient_pole(self):
        m = CoefficientModel({(3, 0): 1.0})
        val = synthesize(m, 1.0, Direction(0.0, 1.0))
        assert abs(val - math.sqrt(7 / FOUR_PI)) < 1e-14

    def test_empty_model(self):
        m = CoefficientModel({}, min_degree=0, max_degree=0)
        assert synthesize(m, 1.5, Direction(0.3, 0.2)) == 0.0

    def test_sigma_decay_monotone(self):
        m = CoefficientModel({(4, 2): 1.3})
        d = Direction(0.7, 0.4)
        vals = [abs(synthesize(m, s, d)) for s in (1.0, 1.5, 2.0, 4.0)]
        assert vals == sorted(vals, reverse=True)

    def test_min_degree_cutoff(self):
        m = CoefficientModel({(1, 0): 5.0, (3, 0): 1.0}, min_degree=3)
        d = Direction(0.0, 0.6)
        assert abs(synthesize(m, 1.0, d) - sh_eval(3, 0, d)) < 1e-14

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(8)
        coeffs = {(n, j): rng.normal() for n in range(3, 7) for j in range(-n, n + 1)}
        m = CoefficientModel(coeffs)
        lon, t, sigma = 1.2, -0.35, 1.1
        d = Direction(lon, t)
        direct = sum(c * sigma ** (-n - 1) * sh_eval(n, j, d)
                     for (n, j), c in coeffs.items())
        batch = synthesize_batch(m, np.full(1, sigma), np.full(1, lon), np.full(1, t))[0]
        assert abs(batch - direct) <= 1e-12 * abs(direct)

    def test_linearity(self):
        a = CoefficientModel({(3, 1): 2.0})
        b = CoefficientModel({(4, -2): -1.5})
        ab = CoefficientModel({(3, 1): 2.0, (4, -2): -1.5})
        d = Direction(2.2, 0.15)
        assert abs(synthesize(ab, 1.3, d) -
                   synthesize(a, 1.3, d) - synthesize(b, 1.3, d)) < 1e-15

    def test_surface_sigma_bound(self):
        with pytest.raises(ValueError):
            synthesize(CoefficientModel({(3, 0): 1.0}), 0.9, Direction(0, 0))


class TestGenerateDataset:
    def test_zero_noise_exact(self):
        rng = np.random.default_rng(9)
        m = CoefficientModel({(3, 0): 1.0, (5, 2): 0.5})
        sigma = rng.uniform(1.05, 1.1, 20)
        lon = rng.uniform(0, 2 * math.pi, 20)
        t = rng.uniform(-1, 1, 20)
        ds = generate_dataset(m, (sigma, lon, t), NoiseSpec(level=0.0))
        np.testing.assert_array_equal(ds.y, synthesize_batch(m, sigma, lon, t))

    def test_seed_reproducible(self):
        rng = np.random.default_rng(10)
        m = CoefficientModel({(3, 0): 1.0})
        orbit = (rng.uniform(1.05, 1.1, 30), rng.uniform(0, 6, 30), rng.uniform(-1, 1, 30))
        a = generate_dataset(m, orbit, NoiseSpec(0.05, seed=7))
        b = generate_dataset(m, orbit, NoiseSpec(0.05, seed=7))
        np.testing.assert_array_equal(a.y, b.y)
        c = generate_dataset(m, orbit, NoiseSpec(0.05, seed=8))
        assert not np.array_equal(a.y, c.y)

    def test_noise_level_statistics(self):
        rng = np.random.default_rng(12)
        n = 100_000
        m = CoefficientModel({(3, 0): 1.0})
        orbit = (np.full(n, 1.08), rng.uniform(0, 6, n), rng.uniform(-0.99, 0.99, n))
        clean = synthesize_batch(m, *orbit)
        ds = generate_dataset(m, orbit, NoiseSpec(0.05, seed=3))
        ratio = ds.y / clean - 1.0
        assert abs(ratio.std() - 0.05) <= 0.001

    def test_empty_orbit_rejected(self):
        m = CoefficientModel({(3, 0): 1.0})
        with pytest.raises(ValueError):
            generate_dataset(m, (np.array([]), np.array([]), np.array([])), NoiseSpec())


class TestDataSet:
    def test_surface_rows_rejected(self):
        with pytest.raises(ValueError):
            DataSet(sigma=np.array([1.0]), lon=np.zeros(1), t=np.zeros(1), y=np.ones(1))

    def test_size(self):
        ds = DataSet(np.full(4, 1.1), np.zeros(4), np.zeros(4), np.ones(4))
        assert ds.size == 4


class TestApplyElement:
    def test_constant_sh(self):
        ds = DataSet(np.full(6, 2.0), np.linspace(0, 5, 6), np.linspace(-0.9, 0.9, 6),
                     np.zeros(6))
        col = apply_element(SH(0, 0), ds)
        np.testing.assert_allclose(col, 0.5 / math.sqrt(FOUR_PI), rtol=1e-14)

    def test_matches_pointwise(self):
        from gravpursuit.basis import upward_eval
        rng = np.random.default_rng(13)
        ds = small_dataset(rng, 20)
        x = BallPoint(0.7, Direction(0.8, -0.2))
        for d in (SH(6, -4), APK(x), APW(x)):
            col = apply_element(d, ds)
            for i in range(ds.size):
                ref = upward_eval(d, ds.sigma[i], Direction(ds.lon[i], ds.t[i]))
                assert abs(col[i] - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_sh_degree_decay(self):
        rng = np.random.default_rng(14)
        lon = rng.uniform(0, 6, 30)
        t = rng.uniform(-1, 1, 30)
        n = 5
        col_a = apply_element(SH(n, 2), DataSet(np.full(30, 1.5), lon, t, np.zeros(30)))
        col_b = apply_element(SH(n, 2), DataSet(np.full(30, 3.0), lon, t, np.zeros(30)))
        ratio = np.linalg.norm(col_a) / np.linalg.norm(col_b)
        assert abs(ratio - 2.0 ** (n + 1)) <= 1e-9 * 2.0 ** (n + 1)

    def test_column_nonzero(self):
        rng = np.random.default_rng(15)
        ds = small_dataset(rng)
        col = apply_element(APK(BallPoint(0.5, Direction(1, 0.3))), ds)
        assert float(col @ col) > 0


class TestApplyElementGrad:
    def test_shape_and_fd(self):
        from gravpursuit.basis import upward_eval
        rng = np.random.default_rng(16)
        ds = small_dataset(rng, 10)
        x = BallPoint(0.6, Direction(0.5, 0.5))
        for fam in (APK, APW):
            jac = apply_element_grad(fam(x), ds)
            assert jac.shape == (10, 3)
            step = 1e-6
            xc = x.to_cartesian()
            for i in (0, 5):
                for k in range(3):
                    dp = np.zeros(3)
                    dp[k] = step
                    fp = upward_eval(fam(BallPoint.from_cartesian(xc + dp)),
                                     ds.sigma[i], Direction(ds.lon[i], ds.t[i]))
                    fm = upward_eval(fam(BallPoint.from_cartesian(xc - dp)),
                                     ds.sigma[i], Direction(ds.lon[i], ds.t[i]))
                    fd = (fp - fm) / (2 * step)
                    assert abs(jac[i, k] - fd) <= 1e-5 * max(abs(fd), 1e-6)

    def test_apw_origin_analytic_limit(self):
        # only the inner-scaling chain term dies at the origin, so the
        # wavelet gradient there equals the plain kernel gradient 3 eta/(4 pi)
        # scaled by sigma^-2
        rng = np.random.default_rng(18)
        ds = small_dataset(rng, 5)
        jac = apply_element_grad(APW(BallPoint(0.0)), ds)
        eta = ds.eta_cart
        expected = 3.0 * eta / (FOUR_PI * ds.sigma[:, None] ** 2)
        np.testing.assert_allclose(jac, expected, rtol=1e-12)

    def test_sh_rejected(self):
        rng = np.random.default_rng(19)
        with pytest.raises(TypeError):
            apply_element_grad(SH(2, 1), small_dataset(rng, 3))
