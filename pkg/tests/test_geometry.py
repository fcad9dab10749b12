import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gravpursuit.geometry import (
    BallPoint,
    Direction,
    GridKind,
    driscoll_healy,
    from_cartesian,
    moving_frame,
    reuter,
    reuter_with_min_points,
    to_cartesian,
)


class TestDirection:
    def test_north_pole(self):
        np.testing.assert_allclose(to_cartesian(Direction(0.0, 1.0)), [0, 0, 1], atol=1e-15)

    def test_equator(self):
        np.testing.assert_allclose(to_cartesian(Direction(0.0, 0.0)), [1, 0, 0], atol=1e-15)

    def test_axis_symmetry(self):
        np.testing.assert_allclose(
            to_cartesian(Direction(math.pi / 2, 0.0), 2.0), [0, 2, 0], atol=1e-15)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            to_cartesian(Direction(0.0, 0.0), -1.0)

    @given(st.floats(0, 2 * math.pi - 1e-9), st.floats(-1, 1))
    def test_unit_norm(self, lon, t):
        assert abs(np.linalg.norm(to_cartesian(Direction(lon, t))) - 1.0) < 1e-14

    @given(st.floats(0, 2 * math.pi - 1e-9), st.floats(-0.999, 0.999))
    def test_round_trip(self, lon, t):
        r, d = from_cartesian(to_cartesian(Direction(lon, t), 2.5))
        assert abs(r - 2.5) < 1e-12
        err = np.linalg.norm(to_cartesian(d, r) - to_cartesian(Direction(lon, t), 2.5))
        assert err <= 1e-12


class TestFromCartesian:
    def test_pole_convention(self):
        r, d = from_cartesian([0.0, 0.0, 3.0])
        assert r == 3.0 and d.t == 1.0 and d.lon == 0.0

    def test_equator_x(self):
        r, d = from_cartesian([1.0, 0.0, 0.0])
        assert r == 1.0 and d.t == 0.0 and d.lon == 0.0

    def test_negative_y(self):
        r, d = from_cartesian([0.0, -2.0, 0.0])
        assert r == 2.0 and d.t == 0.0
        assert abs(d.lon - 3 * math.pi / 2) < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            from_cartesian([0.0, 0.0, 0.0])


class TestBallPoint:
    def test_bounds(self):
        with pytest.raises(ValueError):
            BallPoint(1.0, Direction(0.0, 0.0))
        with pytest.raises(ValueError):
            BallPoint(-0.1, Direction(0.0, 0.0))

    def test_origin_from_cartesian(self):
        assert BallPoint.from_cartesian(np.zeros(3)).h == 0.0

    def test_round_trip(self):
        x = np.array([0.3, -0.2, 0.5])
        np.testing.assert_allclose(BallPoint.from_cartesian(x).to_cartesian(), x, atol=1e-14)


class TestMovingFrame:
    def test_equator_frame(self):
        er, el, et = moving_frame(Direction(0.0, 0.0))
        np.testing.assert_allclose(er, [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(el, [0, 1, 0], atol=1e-15)

    def test_antipodal_equator(self):
        er, _, _ = moving_frame(Direction(math.pi, 0.0))
        np.testing.assert_allclose(er, [-1, 0, 0], atol=1e-15)

    def test_pole_rejected(self):
        with pytest.raises(ValueError, match="polar frame"):
            moving_frame(Direction(0.0, 1.0))

    def test_orthonormality_bulk(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(10_000):
            d = Direction(rng.uniform(0, 2 * math.pi), rng.uniform(-0.999, 0.999))
            frame = np.stack(moving_frame(d))
            worst = max(worst, np.abs(frame @ frame.T - np.eye(3)).max())
        assert worst <= 1e-13

    def test_frame_derivative_identities(self):
        # d(eps_r)/dlon = sqrt(1-t^2) eps_lon and d(eps_r)/dt = eps_t/sqrt(1-t^2)
        rng = np.random.default_rng(5)
        step = 1e-6
        for _ in range(50):
            lon = rng.uniform(0, 2 * math.pi)
            t = rng.uniform(-0.9, 0.9)
            _, el, et = moving_frame(Direction(lon, t))
            u = math.sqrt(1 - t * t)
            dlon = (to_cartesian(Direction(lon + step, t)) -
                    to_cartesian(Direction(lon - step, t))) / (2 * step)
            dt = (to_cartesian(Direction(lon, t + step)) -
                  to_cartesian(Direction(lon, t - step))) / (2 * step)
            assert np.linalg.norm(dlon - u * el) / np.linalg.norm(dlon) <= 1e-7
            assert np.linalg.norm(dt - et / u) / np.linalg.norm(dt) <= 1e-7


class TestDriscollHealy:
    def test_fine_grid_count(self):
        # the reference count is the plain product of the step counts
        assert 901 * 1801 == 1_622_701

    def test_two_by_one(self):
        g = driscoll_healy(2, 1)
        assert len(g) == 2
        assert g.points[0].t == 1.0 and g.points[1].t == -1.0

    def test_three_by_four(self):
        g = driscoll_healy(3, 4)
        assert len(g) == 12
        ts = sorted({round(d.t, 12) for d in g.points})
        assert ts == [-1.0, 0.0, 1.0]

    def test_desk_grid(self):
        assert len(driscoll_healy(181, 361)) == 181 * 361

    def test_determinism(self):
        assert driscoll_healy(5, 8).points == driscoll_healy(5, 8).points

    def test_kind(self):
        g = driscoll_healy(3, 4)
        assert g.kind is GridKind.DRISCOLL_HEALY and g.params == (3, 4)


class TestReuter:
    def test_gamma_one_is_poles(self):
        g = reuter(1)
        assert len(g) == 2
        assert {d.t for d in g.points} == {1.0, -1.0}

    def test_gamma_two_has_equator_ring(self):
        g = reuter(2)
        ring = [d for d in g.points if abs(d.t) < 1e-12]
        assert len(ring) >= 3 and len(g) == 2 + len(ring)

    def test_points_distinct(self):
        g = reuter(7)
        assert len(set(g.points)) == len(g.points)

    def test_min_points_default_seed_grid(self):
        g = reuter_with_min_points(123)
        assert len(g) >= 123
        gamma = g.params[0]
        assert len(reuter(gamma - 1)) < 123

    def test_determinism(self):
        assert reuter(9).points == reuter(9).points
