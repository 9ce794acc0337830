"""Round trips and corruption handling for the on-disk formats."""

import numpy as np
import pytest
from conftest import random_pose, small_intrinsics

from viewwarp import DepthMap, FeatureGrid, OcclusionMask
from viewwarp import io as vio


def f32(values):
    """Quantize to float32 so binary round trips can be exact."""
    return np.asarray(values, dtype=np.float32).astype(np.float64)


class TestDepthBinary:
    def test_round_trip_preserves_values_and_validity(self, tmp_path, rng):
        values = f32(rng.uniform(0.5, 9.0, (13, 17)))
        values[2, 3] = np.nan
        values[5, 5] = -1.0
        depth = DepthMap.from_values(values)
        path = tmp_path / "d.dpt"
        vio.save_depth(path, depth)
        loaded = vio.load_depth(path)
        assert np.array_equal(loaded.valid, depth.valid)
        assert np.array_equal(loaded.values[loaded.valid], values[depth.valid])
        assert loaded.confidence is None

    def test_confidence_plane_round_trip(self, tmp_path, rng):
        values = f32(rng.uniform(1.0, 4.0, (8, 9)))
        conf = f32(rng.uniform(0.0, 1.0, (8, 9)))
        path = tmp_path / "d.dpt"
        vio.save_depth(path, DepthMap.from_values(values, conf))
        loaded = vio.load_depth(path)
        assert np.array_equal(loaded.values, values)
        assert np.array_equal(loaded.confidence, conf)

    def test_invalid_pixels_load_as_invalid(self, tmp_path):
        values = np.full((4, 4), 2.0)
        values[0, 0] = np.inf
        path = tmp_path / "d.dpt"
        vio.save_depth(path, DepthMap.from_values(values))
        loaded = vio.load_depth(path)
        assert not loaded.valid[0, 0]
        assert loaded.values[0, 0] == 0.0

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.dpt"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(ValueError, match="DPT1"):
            vio.load_depth(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "d.dpt"
        vio.save_depth(path, DepthMap.from_values(np.full((6, 6), 3.0)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="bytes"):
            vio.load_depth(path)

    def test_single_plane_reader_rejects_multiplane(self, tmp_path, rng):
        path = tmp_path / "p.dpt"
        vio.save_planes(path, rng.uniform(-1, 1, (5, 6, 3)))
        with pytest.raises(ValueError, match="load_planes"):
            vio.load_depth(path)


class TestMultiPlane:
    def test_round_trip(self, tmp_path, rng):
        data = f32(rng.uniform(-1.0, 1.0, (7, 11, 24)))
        path = tmp_path / "p.dpt"
        vio.save_planes(path, data)
        assert np.array_equal(vio.load_planes(path), data)

    def test_two_dim_input_gains_channel_axis(self, tmp_path, rng):
        data = f32(rng.uniform(0, 1, (5, 4)))
        path = tmp_path / "p.dpt"
        vio.save_planes(path, data)
        loaded = vio.load_planes(path)
        assert loaded.shape == (5, 4, 1)
        assert np.array_equal(loaded[:, :, 0], data)

    def test_multiplane_reader_rejects_single_plane(self, tmp_path):
        path = tmp_path / "d.dpt"
        vio.save_depth(path, DepthMap.from_values(np.full((3, 3), 1.5)))
        with pytest.raises(ValueError, match="load_depth"):
            vio.load_planes(path)

    def test_rejects_truncation(self, tmp_path, rng):
        path = tmp_path / "p.dpt"
        vio.save_planes(path, rng.uniform(0, 1, (4, 4, 2)))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError, match="truncated"):
            vio.load_planes(path)


class TestDepthPng:
    def test_quantization_error_is_bounded(self, tmp_path, rng):
        values = rng.uniform(0.5, 20.0, (10, 12))
        depth = DepthMap.from_values(values)
        path = tmp_path / "d.png"
        vio.save_depth_png(path, depth, scale=1000.0)
        loaded = vio.load_depth_png(path, scale=1000.0)
        assert loaded.valid.all()
        assert np.abs(loaded.values - values).max() <= 0.5 / 1000.0 + 1e-12

    def test_invalid_pixels_survive(self, tmp_path):
        values = np.full((6, 6), 3.0)
        values[1, 2] = np.nan
        path = tmp_path / "d.png"
        vio.save_depth_png(path, DepthMap.from_values(values))
        loaded = vio.load_depth_png(path)
        assert not loaded.valid[1, 2]
        assert loaded.valid.sum() == 35

    def test_range_overflow_raises(self, tmp_path):
        depth = DepthMap.from_values(np.full((2, 2), 100.0))
        with pytest.raises(ValueError, match="16-bit"):
            vio.save_depth_png(tmp_path / "d.png", depth, scale=1000.0)


class TestImageAndMask:
    def test_rgb_round_trip_within_half_level(self, tmp_path, rng):
        data = rng.uniform(0.0, 1.0, (9, 14, 3))
        path = tmp_path / "i.png"
        vio.save_image(path, FeatureGrid(data))
        loaded = vio.load_image(path)
        assert loaded.shape == (9, 14) and loaded.channels == 3
        assert np.abs(loaded.data - data).max() <= 0.5 / 255.0 + 1e-12

    def test_grayscale_keeps_single_channel(self, tmp_path, rng):
        data = rng.uniform(0.0, 1.0, (6, 7, 1))
        path = tmp_path / "g.png"
        vio.save_image(path, FeatureGrid(data))
        loaded = vio.load_image(path)
        assert loaded.channels == 1
        assert np.abs(loaded.data - data).max() <= 0.5 / 255.0 + 1e-12

    def test_rejects_unsupported_channel_count(self, tmp_path, rng):
        with pytest.raises(ValueError, match="channels"):
            vio.save_image(tmp_path / "x.png", FeatureGrid(rng.uniform(0, 1, (4, 4, 2))))

    def test_mask_round_trip_is_exact(self, tmp_path, rng):
        holes = rng.uniform(size=(15, 22)) < 0.3
        path = tmp_path / "m.png"
        vio.save_mask(path, OcclusionMask(holes))
        assert np.array_equal(vio.load_mask(path).holes, holes)


class TestCameraJson:
    def test_round_trip_is_exact(self, tmp_path, rng):
        intrinsics = small_intrinsics(101, 67, f=123.456)
        pose = random_pose(rng)
        path = tmp_path / "cam.json"
        vio.save_camera(path, intrinsics, pose)
        k, p = vio.load_camera(path)
        assert k == intrinsics
        assert np.array_equal(p.rotation, pose.rotation)
        assert np.array_equal(p.translation, pose.translation)

    def test_missing_pose_defaults_to_identity(self, tmp_path):
        intrinsics = small_intrinsics()
        path = tmp_path / "cam.json"
        vio.save_camera(path, intrinsics)
        _, p = vio.load_camera(path)
        assert np.array_equal(p.rotation, np.eye(3))
        assert np.array_equal(p.translation, np.zeros(3))


class TestMatches:
    def test_five_column_round_trip(self, tmp_path, rng):
        matches = f32(rng.uniform(0, 200, (40, 5)))
        path = tmp_path / "m.mch"
        vio.save_matches(path, matches)
        loaded = vio.load_matches(path)
        assert loaded.shape == (40, 5) and loaded.dtype == np.float64
        assert np.array_equal(loaded, matches)

    def test_four_columns_gain_unit_weight(self, tmp_path, rng):
        matches = f32(rng.uniform(0, 50, (7, 4)))
        path = tmp_path / "m.mch"
        vio.save_matches(path, matches)
        loaded = vio.load_matches(path)
        assert np.array_equal(loaded[:, :4], matches)
        assert np.array_equal(loaded[:, 4], np.ones(7))

    def test_empty_match_list(self, tmp_path):
        path = tmp_path / "m.mch"
        vio.save_matches(path, np.zeros((0, 5)))
        assert vio.load_matches(path).shape == (0, 5)

    def test_rejects_bad_shape(self, tmp_path):
        with pytest.raises(ValueError, match="matches"):
            vio.save_matches(tmp_path / "m.mch", np.zeros((3, 3)))

    def test_rejects_wrong_magic_and_truncation(self, tmp_path, rng):
        path = tmp_path / "m.mch"
        path.write_bytes(b"XXXX" + bytes(16))
        with pytest.raises(ValueError, match="MCH1"):
            vio.load_matches(path)
        vio.save_matches(path, f32(rng.uniform(0, 10, (5, 5))))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(ValueError, match="records"):
            vio.load_matches(path)
