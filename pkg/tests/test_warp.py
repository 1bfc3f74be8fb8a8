"""Image-warp contracts: pass-through, round trips, coverage, sampling."""

import numpy as np
import pytest

from foveate import geometry as g
from foveate.errors import DimensionMismatch
from foveate.geometry import MobiusParams, SphereGeom
from foveate.warp import (
    ImageBuffer,
    bilinear_sample,
    forward_warp,
    inverse_warp,
    psnr,
)
from conftest import make_smooth_image


def draw_theta(rng, diag=(0.8, 1.2), off=(-0.1, 0.1)):
    a, d = rng.uniform(*diag, 2)
    b, c = rng.uniform(*off, 2)
    return g.normalize(MobiusParams(a, b, c, d))


class TestImageBuffer:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((4, 4)))

    def test_range_validation(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.full((2, 2, 3), 1.5))

    def test_nan_rejected(self):
        bad = np.zeros((2, 2, 3))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            ImageBuffer(bad)

    def test_clip_on_request(self):
        img = ImageBuffer.from_array(np.full((2, 2, 3), 1.0 + 1e-12), clip=True)
        assert img.data.max() == 1.0


class TestBilinearSample:
    def test_lattice_points_exact(self):
        rng = np.random.default_rng(0)
        img = ImageBuffer.from_array(rng.random((5, 7, 3)))
        for y in range(5):
            for x in range(7):
                color, inside = bilinear_sample(img, float(x), float(y))
                assert inside
                np.testing.assert_array_equal(color, img.data[y, x])

    def test_constant_preserved(self):
        img = ImageBuffer.full(6, 6, 0.42)
        for xy in [(0.3, 4.7), (2.5, 2.5), (5.2, 0.1)]:
            color, inside = bilinear_sample(img, *xy)
            assert inside
            np.testing.assert_allclose(color, 0.42)

    def test_midpoint_between_pixels(self):
        data = np.zeros((1, 2, 3))
        data[0, 1] = 1.0
        img = ImageBuffer(data)
        color, inside = bilinear_sample(img, 0.5, 0.0)
        assert inside
        np.testing.assert_allclose(color, 0.5)

    def test_outside_margin_is_black(self):
        img = ImageBuffer.full(4, 4, 1.0)
        color, inside = bilinear_sample(img, -0.6, 1.0)
        assert not inside
        np.testing.assert_array_equal(color, 0.0)

    def test_margin_border_clamps(self):
        img = ImageBuffer.full(4, 4, 0.8)
        color, inside = bilinear_sample(img, -0.4, 3.4)
        assert inside
        np.testing.assert_allclose(color, 0.8)


class TestWarps:
    def test_identity_forward_passthrough(self):
        img = make_smooth_image(64, 1)
        out, mask = forward_warp(img, MobiusParams.identity(), img.geom())
        assert np.abs(out.data - img.data).max() < 1e-6
        assert mask.inside.all()

    def test_identity_inverse_passthrough(self):
        img = make_smooth_image(64, 2)
        out, mask = inverse_warp(img, MobiusParams.identity(), img.geom())
        assert np.abs(out.data - img.data).max() < 1e-6
        assert mask.inside.all()

    def test_round_trip_interior_psnr(self):
        img = make_smooth_image(128, 3)
        geom = img.geom()
        theta = g.normalize(MobiusParams(1.2, 0.05, 0.03, 0.9))
        warped, m1 = forward_warp(img, theta, geom)
        back, m2 = inverse_warp(warped, theta, geom)
        interior = m2.inside & _warped_mask(m1, theta, geom, inverse=True)
        assert psnr(img, back, interior) >= 30.0

    def test_round_trip_other_order(self):
        img = make_smooth_image(128, 4)
        geom = img.geom()
        theta = g.normalize(MobiusParams(0.9, -0.04, 0.02, 1.1))
        warped, m1 = inverse_warp(img, theta, geom)
        back, m2 = forward_warp(warped, theta, geom)
        interior = m2.inside & _warped_mask(m1, theta, geom, inverse=False)
        assert psnr(img, back, interior) >= 30.0

    def test_constant_image_fixed_point(self):
        img = ImageBuffer.full(48, 48, 0.37)
        rng = np.random.default_rng(5)
        for _ in range(5):
            theta = draw_theta(rng)
            out, mask = forward_warp(img, theta, img.geom())
            assert np.abs(out.data[mask.inside] - 0.37).max() < 1e-9

    def test_inverse_equals_forward_of_matrix_inverse(self):
        img = make_smooth_image(64, 6)
        geom = img.geom()
        theta = g.normalize(MobiusParams(1.1, 0.05, -0.02, 0.92))
        via_inverse, mi = inverse_warp(img, theta, geom)
        via_forward, mf = forward_warp(img, g.mobius_adjugate(theta), geom)
        assert np.abs(via_inverse.data - via_forward.data).max() < 1e-6
        assert (mi.inside == mf.inside).all()

    def test_output_range_and_dims(self):
        img = make_smooth_image(64, 7)
        rng = np.random.default_rng(8)
        for _ in range(5):
            out, mask = forward_warp(img, draw_theta(rng), img.geom())
            assert out.data.shape == img.data.shape
            assert out.data.min() >= 0.0 and out.data.max() <= 1.0
            assert mask.inside.shape == (img.height, img.width)

    def test_geom_mismatch_rejected(self):
        img = make_smooth_image(32, 9)
        with pytest.raises(DimensionMismatch):
            forward_warp(img, MobiusParams.identity(), SphereGeom(16, 16))

    def test_coverage_high_near_identity(self):
        # Per-draw floor only holds very close to identity: a relative
        # pull-back scale s loses about 1 - 1/s^2 of the footprint.
        img = ImageBuffer.full(96, 96, 0.5)
        rng = np.random.default_rng(10)
        for _ in range(20):
            theta = draw_theta(rng, diag=(0.995, 1.005), off=(-0.002, 0.002))
            _, mask = forward_warp(img, theta, img.geom())
            assert mask.interior_fraction >= 0.95

    def test_coverage_mean_over_wider_draws(self):
        # The wider draw family keeps most of the image in view on average.
        img = ImageBuffer.full(96, 96, 0.5)
        rng = np.random.default_rng(1234)
        fractions = []
        for _ in range(20):
            theta = draw_theta(rng)
            _, mask = forward_warp(img, theta, img.geom())
            fractions.append(mask.interior_fraction)
        assert float(np.mean(fractions)) >= 0.75


def _warped_mask(mask, theta, geom, inverse):
    """Carry a coverage mask through the opposite warp, thresholded."""
    as_img = ImageBuffer.from_array(
        np.repeat(mask.inside[:, :, None], 3, axis=2).astype(np.float64)
    )
    warp = inverse_warp if inverse else forward_warp
    warped, _ = warp(as_img, theta, geom)
    return warped.data[..., 0] > 0.999
