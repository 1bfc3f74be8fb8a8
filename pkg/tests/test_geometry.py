"""Mobius, stereographic, and pixel-mapping properties."""

import math

import numpy as np
import pytest

from foveate import geometry as g
from foveate.errors import DegenerateParams, OutOfBounds
from foveate.geometry import ComplexPoint, MobiusParams, SphereGeom, SpherePoint


def random_params(rng, spread=1.0):
    """Non-degenerate coefficients with determinant bounded away from zero."""
    while True:
        vals = rng.uniform(-spread, spread, 4)
        p = MobiusParams(*vals)
        if abs(p.det()) > 0.05:
            return g.normalize(p)


def random_point(rng, radius=2.0):
    return ComplexPoint(rng.uniform(-radius, radius), rng.uniform(-radius, radius))


class TestNormalize:
    def test_identity_unchanged(self):
        p = g.normalize(MobiusParams(1, 0, 0, 1))
        assert (p.a, p.b, p.c, p.d) == (1, 0, 0, 1)

    def test_uniform_scale_collapses(self):
        p = g.normalize(MobiusParams(2, 0, 0, 2))
        assert np.allclose([p.a, p.b, p.c, p.d], [1, 0, 0, 1])

    def test_scaling_preserves_map(self):
        rng = np.random.default_rng(3)
        raw = MobiusParams(1.3, -0.2, 0.4, 0.9)
        norm = g.normalize(raw)
        for _ in range(10):
            w = random_point(rng)
            z1 = g.mobius_apply(raw, w)
            z2 = g.mobius_apply(norm, w)
            assert abs(z1.to_complex() - z2.to_complex()) < 1e-12

    def test_zero_determinant_rejected(self):
        with pytest.raises(DegenerateParams):
            g.normalize(MobiusParams(1, 0, 0, 0))

    def test_unit_determinant_postcondition(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = random_params(rng)
            assert abs(p.det() - 1.0) < 1e-9

    def test_negative_determinant_gets_unit_det(self):
        p = g.normalize(MobiusParams(0, 1, 1, 0))
        assert abs(p.det() - 1.0) < 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            p = random_params(rng)
            q = g.normalize(p)
            assert (q.a, q.b, q.c, q.d) == (p.a, p.b, p.c, p.d)


class TestMobiusApply:
    def test_identity_map(self):
        z = g.mobius_apply(MobiusParams(1, 0, 0, 1), ComplexPoint(0.5, 0.2))
        assert (z.re, z.im) == (0.5, 0.2)

    def test_reciprocal_map(self):
        z = g.mobius_apply(MobiusParams(0, 1, 1, 0), ComplexPoint(2.0, 0.0))
        assert abs(z.to_complex() - 0.5) < 1e-15

    def test_inverse_scalar_example(self):
        z = g.mobius_inverse_apply(MobiusParams(0, 1, 1, 0), ComplexPoint(0.5, 0.0))
        assert abs(z.to_complex() - 2.0) < 1e-15

    def test_pole_maps_to_infinity(self):
        z = g.mobius_apply(MobiusParams(1, 0, 1, -0.5), ComplexPoint(0.5, 0.0))
        assert z.at_infinity

    def test_infinity_maps_to_a_over_c(self):
        z = g.mobius_apply(g.normalize(MobiusParams(2, 1, 1, 1)), ComplexPoint.infinity())
        assert not z.at_infinity and abs(z.re - 2.0) < 1e-12

    def test_infinity_fixed_when_c_zero(self):
        z = g.mobius_apply(MobiusParams(1, 0.5, 0, 1), ComplexPoint.infinity())
        assert z.at_infinity

    def test_round_trip_hundred_points(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            p = random_params(rng)
            w = random_point(rng)
            back = g.mobius_inverse_apply(p, g.mobius_apply(p, w))
            if back.at_infinity:
                continue
            assert abs(back.to_complex() - w.to_complex()) < 1e-9

    def test_round_trip_other_order(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            p = random_params(rng)
            w = random_point(rng)
            back = g.mobius_apply(p, g.mobius_inverse_apply(p, w))
            if back.at_infinity:
                continue
            assert abs(back.to_complex() - w.to_complex()) < 1e-9

    def test_group_closure(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            p = random_params(rng)
            q = random_params(rng)
            w = random_point(rng)
            step = g.mobius_apply(q, g.mobius_apply(p, w))
            combined = g.mobius_apply(g.mobius_compose(q, p), w)
            if step.at_infinity or combined.at_infinity:
                assert step.at_infinity == combined.at_infinity
                continue
            assert abs(step.to_complex() - combined.to_complex()) < 1e-8

    def test_conformality_jacobian(self):
        # A conformal map's Jacobian is a scaled rotation: equal diagonal,
        # antisymmetric off-diagonal, checked by central differences.
        rng = np.random.default_rng(24)
        h = 1e-5
        checked = 0
        while checked < 50:
            p = random_params(rng)
            w = random_point(rng)
            if abs(p.c * w.to_complex() + p.d) <= 0.1:
                continue
            f = lambda re, im: g.mobius_apply(p, ComplexPoint(re, im)).to_complex()
            dre = (f(w.re + h, w.im) - f(w.re - h, w.im)) / (2 * h)
            dim = (f(w.re, w.im + h) - f(w.re, w.im - h)) / (2 * h)
            j00, j10 = dre.real, dre.imag
            j01, j11 = dim.real, dim.imag
            sigma = math.sqrt((j00**2 + j01**2 + j10**2 + j11**2) / 2.0)
            assert abs(j00 - j11) < 1e-3 * sigma
            assert abs(j01 + j10) < 1e-3 * sigma
            checked += 1


class TestStereographic:
    def test_south_pole_to_origin(self):
        z = g.stereo_project(SpherePoint(0, 0, -1))
        assert (z.re, z.im, z.at_infinity) == (0, 0, False)

    def test_equator_point(self):
        z = g.stereo_project(SpherePoint(1, 0, 0))
        assert abs(z.re - 1.0) < 1e-15 and z.im == 0

    def test_north_pole_to_infinity(self):
        assert g.stereo_project(SpherePoint(0, 0, 1)).at_infinity

    def test_unproject_origin(self):
        s = g.stereo_unproject(ComplexPoint(0, 0))
        assert (s.x, s.y, s.z) == (0, 0, -1)

    def test_unproject_unit(self):
        s = g.stereo_unproject(ComplexPoint(1, 0))
        assert np.allclose([s.x, s.y, s.z], [1, 0, 0])

    def test_unproject_infinity(self):
        s = g.stereo_unproject(ComplexPoint.infinity())
        assert (s.x, s.y, s.z) == (0, 0, 1)

    def test_round_trip_random_sphere_points(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            v = rng.normal(size=3)
            s = SpherePoint.normalized(*v)
            back = g.stereo_unproject(g.stereo_project(s))
            assert abs(back.x - s.x) < 1e-9
            assert abs(back.y - s.y) < 1e-9
            assert abs(back.z - s.z) < 1e-9

    def test_unproject_is_unit_norm(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            s = g.stereo_unproject(random_point(rng, radius=5.0))
            assert abs(s.x**2 + s.y**2 + s.z**2 - 1.0) < 1e-9


class TestPixelMapping:
    GEOM = SphereGeom(64, 48, 90.0)

    def test_center_maps_to_axis(self):
        s = g.pixel_to_sphere(32.0, 24.0, self.GEOM)
        assert np.allclose([s.x, s.y, s.z], [0, 0, -1])

    def test_horizontal_mirror_symmetry(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            u = rng.uniform(1e-6, 64.0 - 1e-6)
            v = rng.uniform(0.0, 48.0)
            left = g.pixel_to_sphere(u, v, self.GEOM)
            right = g.pixel_to_sphere(64.0 - u, v, self.GEOM)
            assert abs(left.x + right.x) < 1e-12

    def test_round_trip_grid(self):
        for u in np.linspace(0.5, 63.5, 8):
            for v in np.linspace(0.5, 47.5, 6):
                s = g.pixel_to_sphere(u, v, self.GEOM)
                ub, vb, inside = g.sphere_to_pixel(s, self.GEOM)
                assert inside
                assert abs(ub - u) < 1e-6 and abs(vb - v) < 1e-6

    def test_out_of_bounds_rejected(self):
        with pytest.raises(OutOfBounds):
            g.pixel_to_sphere(-1.0, 0.0, self.GEOM)
        with pytest.raises(OutOfBounds):
            g.pixel_to_sphere(0.0, 48.5, self.GEOM)

    def test_center_back_projection(self):
        u, v, inside = g.sphere_to_pixel(SpherePoint(0, 0, -1), self.GEOM)
        assert inside and (u, v) == (32.0, 24.0)

    def test_north_pole_outside(self):
        _, _, inside = g.sphere_to_pixel(SpherePoint(0, 0, 1), self.GEOM)
        assert not inside

    def test_geom_validation(self):
        with pytest.raises(ValueError):
            SphereGeom(0, 10)
        with pytest.raises(ValueError):
            SphereGeom(10, 10, 180.0)


class TestGridConsistency:
    """The vectorized grid path must match the scalar operations exactly."""

    GEOM = SphereGeom(40, 30, 75.0)

    def test_pixel_grid_matches_scalar(self):
        grid = g.pixel_grid_to_plane(self.GEOM)
        rng = np.random.default_rng(51)
        for _ in range(100):
            i = rng.integers(0, 30)
            j = rng.integers(0, 40)
            s = g.pixel_to_sphere(j + 0.5, i + 0.5, self.GEOM)
            w = g.stereo_project(s)
            assert abs(grid[i, j] - complex(w.re, w.im)) < 1e-12

    def test_mobius_grid_matches_scalar(self):
        rng = np.random.default_rng(52)
        p = random_params(rng)
        pts = rng.uniform(-2, 2, (100, 2))
        grid = pts[:, 0] + 1j * pts[:, 1]
        for inverse in (False, True):
            z, finite = g.mobius_apply_grid(p, grid, inverse=inverse)
            op = g.mobius_inverse_apply if inverse else g.mobius_apply
            for k in range(100):
                expect = op(p, ComplexPoint(pts[k, 0], pts[k, 1]))
                assert finite[k] == (not expect.at_infinity)
                if finite[k]:
                    assert abs(z[k] - expect.to_complex()) < 1e-12

    def test_plane_grid_matches_scalar(self):
        rng = np.random.default_rng(53)
        pts = rng.uniform(-1.5, 1.5, (100, 2))
        grid = pts[:, 0] + 1j * pts[:, 1]
        u, v, inside = g.plane_to_pixel_grid(grid, np.ones(100, dtype=bool), self.GEOM)
        for k in range(100):
            s = g.stereo_unproject(ComplexPoint(pts[k, 0], pts[k, 1]))
            ue, ve, ie = g.sphere_to_pixel(s, self.GEOM)
            assert inside[k] == ie
            if ie:
                assert abs(u[k] - ue) < 1e-9 and abs(v[k] - ve) < 1e-9
