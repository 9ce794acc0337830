"""Synthetic scenes and the exact ray-cast oracle they provide."""

import numpy as np
import pytest
from conftest import small_intrinsics

from viewwarp import RigidPose, forward_warp
from viewwarp import synthoracle
from viewwarp.synthoracle import (
    bruteforce_warp,
    disparity_band_width,
    homography_matrix,
    homography_resample,
    render,
    rotation_pair_scene,
    single_plane_scene,
    smooth_texture,
    tilted_plane_scene,
    trace,
    two_plane_scene,
)


class TestRendering:
    def test_single_plane_has_constant_depth(self):
        k = small_intrinsics(32, 24, f=40.0)
        scene = single_plane_scene(k, depth=4.0)
        image, depth = render(scene, 0)
        assert depth.valid.all()
        assert np.abs(depth.values - 4.0).max() <= 1e-12
        assert image.shape == (24, 32) and image.channels == 3
        assert image.data.min() >= 0.0 and image.data.max() <= 1.0

    def test_trace_depth_equals_point_z(self):
        k = small_intrinsics(16, 12, f=30.0)
        scene = two_plane_scene(k, z_near=2.0, z_far=6.0, baseline=0.3,
                                square_size_px=6.0)
        result = trace(scene, 0)
        assert result.valid.all()
        assert (result.hit >= 0).all()
        np.testing.assert_allclose(
            result.points[..., 2], result.depth, atol=1e-12
        )

    def test_two_plane_depth_has_two_levels(self):
        k = small_intrinsics(32, 24, f=40.0)
        scene = two_plane_scene(k, z_near=2.0, z_far=6.0, baseline=0.3,
                                square_size_px=10.0)
        _, depth = render(scene, 0)
        levels = np.unique(np.round(depth.values, 9))
        assert set(levels.tolist()) == {2.0, 6.0}

    def test_tilted_plane_inverse_depth_is_affine_in_pixels(self):
        # a plane n.X = c seen by a pinhole gives 1/z affine in (u, v)
        k = small_intrinsics(32, 24, f=40.0)
        scene = tilted_plane_scene(k, center_depth=4.0, tilt=(0.25, -0.15))
        _, depth = render(scene, 0)
        inv = 1.0 / depth.values
        du = np.diff(inv, axis=1)
        dv = np.diff(inv, axis=0)
        assert np.abs(du - du[0, 0]).max() <= 1e-12
        assert np.abs(dv - dv[0, 0]).max() <= 1e-12


class TestBruteforceWarp:
    def test_self_warp_reproduces_render(self):
        k = small_intrinsics(32, 24, f=40.0)
        scene = two_plane_scene(k, z_near=2.0, z_far=6.0, baseline=0.3,
                                square_size_px=10.0)
        image, _ = render(scene, 0)
        warped, mask = bruteforce_warp(scene, 0, 0)
        assert mask.count() == 0
        assert np.abs(warped.data - image.data).max() <= 1e-12

    def test_rotation_only_warp_has_no_interior_holes(self):
        # a pure rotation cannot disocclude anything: the only holes are the
        # thin frame-entry band where target pixels look outside the source
        k = small_intrinsics(48, 36, f=60.0)
        scene = rotation_pair_scene(k, [0.02, -0.03, 0.01], depth=4.0)
        _, mask = bruteforce_warp(scene, 0, 1)
        assert mask.holes[4:-4, 4:-4].sum() == 0

    def test_band_width_formula(self):
        k = small_intrinsics(192, 144, f=120.0)
        assert disparity_band_width(k, 0.5, 2.0, 6.0) == pytest.approx(20.0)
        assert disparity_band_width(k, 0.3, 3.0, 3.0) == pytest.approx(0.0)

    @pytest.mark.parametrize("z_near,z_far,baseline,seed", [
        (2.0, 6.0, 0.5, 1),
        (3.0, 9.0, 0.75, 2),
        (2.0, 6.0, 0.6, 3),
    ])
    def test_forward_warp_agrees_with_bruteforce(self, z_near, z_far, baseline, seed):
        k = small_intrinsics(192, 144, f=120.0)
        scene = two_plane_scene(k, z_near=z_near, z_far=z_far, baseline=baseline,
                                square_size_px=60.0, seed=seed)
        image, depth = render(scene, 0)
        warped, mask = forward_warp(image, depth, scene.relative_pose(0, 1), k)
        oracle_img, oracle_mask = bruteforce_warp(scene, 0, 1)

        union = np.logical_or(mask.holes, oracle_mask.holes).sum()
        inter = np.logical_and(mask.holes, oracle_mask.holes).sum()
        assert union > 0 and inter / union >= 0.95

        agree = ~mask.holes & ~oracle_mask.holes
        assert np.abs(warped.data - oracle_img.data)[agree].max() <= 0.5 / 255.0


class TestTextures:
    def test_range_is_clamped_away_from_extremes(self, rng):
        texture = smooth_texture(wavelength=50.0, channels=3, seed=2)
        points = rng.normal(scale=30.0, size=(500, 3))
        values = texture(points)
        assert values.shape == (500, 3)
        assert values.min() >= 0.05 and values.max() <= 0.95

    def test_band_limited_slope(self, rng):
        # two sinusoids of wavelengths L and 1.7 L, amplitude 0.225 each,
        # bound the directional derivative by 2 * 0.225 * 2*pi/L
        wavelength = 40.0
        texture = smooth_texture(wavelength=wavelength, channels=1, seed=5)
        a = rng.normal(scale=25.0, size=(400, 3))
        step = 1e-3 * rng.normal(size=(400, 3))
        slope = np.abs(texture(a + step) - texture(a))[:, 0]
        bound = 2 * 0.225 * (2 * np.pi / wavelength)
        assert np.all(slope <= bound * np.linalg.norm(step, axis=1) + 1e-6)

    def test_deterministic_in_seed(self):
        a = smooth_texture(30.0, channels=2, seed=9)
        b = smooth_texture(30.0, channels=2, seed=9)
        pts = np.array([[0.0, 0.0, 0.0], [3.3, -2.2, 1.0]])
        assert np.array_equal(a(pts), b(pts))


class TestHomographyHelpers:
    def test_identity_homography_keeps_image(self, rng):
        image = rng.uniform(0, 1, (24, 32, 3))
        out, inside = homography_resample(image, np.eye(3))
        assert np.abs(out[inside] - image[inside]).max() <= 1e-12

    def test_homography_matrix_of_identity_rotation(self):
        k = small_intrinsics(32, 24, f=40.0)
        np.testing.assert_allclose(homography_matrix(k, np.eye(3)), np.eye(3), atol=1e-12)

    def test_apply_homography_round_trip(self, rng):
        k = small_intrinsics(64, 48, f=80.0)
        pose = RigidPose.from_axis_angle([0.03, -0.02, 0.01], np.zeros(3))
        h = homography_matrix(k, pose.rotation)
        coords = np.stack([rng.uniform(0, 64, 30), rng.uniform(0, 48, 30)], axis=1)
        forward = synthoracle.apply_homography(h, coords)
        back = synthoracle.apply_homography(np.linalg.inv(h), forward)
        np.testing.assert_allclose(back, coords, atol=1e-9)


class TestSceneStructure:
    def test_relative_pose_composes_extrinsics(self):
        k = small_intrinsics(16, 12)
        scene = two_plane_scene(k, baseline=0.5, square_size_px=4.0)
        rel = scene.relative_pose(0, 1)
        # camera 1 is shifted along +x in world, so points move along -x... the
        # configured extrinsic places view 1 at translation (-baseline, 0, 0)
        np.testing.assert_allclose(rel.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(rel.translation, [-0.5, 0.0, 0.0], atol=1e-12)

    def test_oracle_band_is_integer_aligned_in_canonical_scene(self):
        k = small_intrinsics(192, 144, f=120.0)
        scene = two_plane_scene(k, z_near=2.0, z_far=6.0, baseline=0.5,
                                square_size_px=60.0, seed=4)
        _, mask = bruteforce_warp(scene, 0, 1)
        # the canonical scene yields integer disparities (30 px near, 10 px
        # far): every hole row in the disocclusion band spans exactly 20 px
        holes = mask.holes
        interior_rows = holes[:, : k.width - 11]  # clip the frame-entry band
        widths = interior_rows.sum(axis=1)
        assert widths.max() == 20
