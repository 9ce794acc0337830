"""End-to-end coverage for the command-line interface."""

import io as stdio
import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image
from conftest import rotation_error, small_intrinsics

from viewwarp import DepthMap, OcclusionMask, RigidPose, cli, datapipe, selfcheck
from viewwarp import filter_occlusion_mask
from viewwarp import io as vio
from viewwarp.geometry import project, unproject

ALL_COMMANDS = {
    "warp", "embed", "mask-filter", "attention-demo",
    "align", "prepare", "synth", "selftest",
}


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert cli.main([
        "synth", "--scene", "two-plane", "--size", "96x72",
        "--seed", "5", "--out", str(out),
    ]) == 0
    return out


@pytest.fixture(scope="module")
def dataset_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    config = datapipe.PipelineConfig(min_interval=10, max_interval=20,
                                     stride=12, seed=3, dataset_tag="tiny")
    datapipe.make_fixture(root, sequences=1, frames=60, size=(32, 24),
                          seed=3, config=config)
    return root, config


class TestSynthAndWarp:
    def test_synth_writes_scene_files(self, scene_dir):
        for name in ("view0.png", "view1.png", "view0.dpt", "view1.dpt",
                     "camera0.json", "camera1.json", "relative.json"):
            assert (scene_dir / name).exists(), name
        intrinsics, pose = vio.load_camera(scene_dir / "relative.json")
        assert (intrinsics.width, intrinsics.height) == (96, 72)
        assert not np.array_equal(pose.translation, np.zeros(3))

    def test_forward_warp_with_filtered_mask(self, scene_dir, tmp_path):
        warped_path = tmp_path / "warped.png"
        mask_path = tmp_path / "mask.png"
        assert cli.main([
            "warp", "--image", str(scene_dir / "view0.png"),
            "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--out", str(warped_path), "--mask", str(mask_path),
            "--min-size", "8",
        ]) == 0
        warped = vio.load_image(warped_path)
        assert warped.shape == (72, 96) and warped.channels == 3
        mask = vio.load_mask(mask_path)
        assert mask.count() > 0
        assert np.array_equal(
            filter_occlusion_mask(mask, 8).holes, mask.holes
        )  # already filtered at min-size 8

    def test_inverse_mode_runs(self, scene_dir, tmp_path):
        out = tmp_path / "inv.png"
        assert cli.main([
            "warp", "--mode", "inverse",
            "--image", str(scene_dir / "view0.png"),
            "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--out", str(out),
        ]) == 0
        assert vio.load_image(out).shape == (72, 96)


class TestEmbedAndAttention:
    def test_embed_writes_multiplane_grid(self, scene_dir, tmp_path):
        out = tmp_path / "emb.dpt"
        assert cli.main([
            "embed", "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--bands", "3", "--scale", "8", "--out", str(out),
        ]) == 0
        planes = vio.load_planes(out)
        assert planes.shape == (72 // 8, 96 // 8, 4 * 3)
        assert np.abs(planes).max() <= 1.0

    def test_indivisible_scale_is_a_usage_error(self, scene_dir, tmp_path):
        assert cli.main([
            "embed", "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--scale", "7", "--out", str(tmp_path / "emb.dpt"),
        ]) == 2

    def test_attention_demo_writes_heatmaps(self, scene_dir, tmp_path):
        cross = tmp_path / "cross.png"
        self_ = tmp_path / "self.png"
        assert cli.main([
            "attention-demo", "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--bands", "2", "--scale", "8",
            "--out-cross", str(cross), "--out-self", str(self_),
        ]) == 0
        for path in (cross, self_):
            heat = vio.load_image(path)
            assert heat.shape == (72 // 8, 96 // 8) and heat.channels == 3

    def test_query_outside_grid_is_a_usage_error(self, scene_dir, tmp_path):
        assert cli.main([
            "attention-demo", "--depth", str(scene_dir / "view0.dpt"),
            "--camera", str(scene_dir / "relative.json"),
            "--scale", "8", "--query", "999,0",
            "--out-cross", str(tmp_path / "c.png"),
            "--out-self", str(tmp_path / "s.png"),
        ]) == 2


class TestAlign:
    def test_recovers_known_pose_despite_outliers(self, tmp_path):
        intrinsics = small_intrinsics(64, 48, f=80.0)
        truth = RigidPose.from_axis_angle([0.03, -0.06, 0.01], [0.2, -0.1, 0.05])
        rng = np.random.default_rng(11)

        # varied depth keeps the lifted points non-coplanar; float32-exact
        # values survive the binary depth format without quantization
        values = rng.uniform(3.0, 8.0, (48, 64)).astype(np.float32).astype(np.float64)
        cols = np.arange(4, 64, 6) + 0.5
        rows = np.arange(4, 48, 6) + 0.5
        uu, vv = np.meshgrid(cols, rows)
        source = np.stack([uu.ravel(), vv.ravel()], axis=1)
        lifted = values[vv.ravel().astype(int), uu.ravel().astype(int)]
        points = unproject(source, lifted, intrinsics)
        target, _ = project(truth.apply(points), intrinsics)
        matches = np.concatenate(
            [source, target, np.ones((len(source), 1))], axis=1
        )
        outliers = rng.choice(len(matches), size=10, replace=False)
        matches[outliers, 2] = rng.uniform(5.0, 59.0, size=10)
        matches[outliers, 3] = rng.uniform(5.0, 43.0, size=10)

        vio.save_matches(tmp_path / "m.mch", matches)
        vio.save_depth(tmp_path / "d.dpt", DepthMap.from_values(values))
        vio.save_camera(tmp_path / "cam.json", intrinsics)

        out = tmp_path / "pose.json"
        assert cli.main([
            "align", "--matches", str(tmp_path / "m.mch"),
            "--depth", str(tmp_path / "d.dpt"),
            "--camera", str(tmp_path / "cam.json"),
            "--out", str(out), "--threshold", "2.0", "--seed", "1",
        ]) == 0
        _, pose = vio.load_camera(out)
        assert rotation_error(pose.rotation, truth.rotation) <= 1e-6
        assert np.abs(pose.translation - truth.translation).max() <= 1e-6


class TestPrepare:
    def args_for(self, root):
        return ["prepare", "--root", str(root), "--min-interval", "10",
                "--max-interval", "20", "--stride", "12", "--seed", "3",
                "--tag", "tiny"]

    def test_matches_library_output(self, dataset_root, tmp_path):
        root, config = dataset_root
        out = tmp_path / "manifest.jsonl"
        assert cli.main(self.args_for(root) + ["--out", str(out)]) == 0
        expected = datapipe.manifest_text(datapipe.build_manifest(root, config))
        assert out.read_text() == expected

    def test_stdout_mode_emits_exactly_the_manifest(self, dataset_root):
        root, config = dataset_root
        expected = datapipe.manifest_text(datapipe.build_manifest(root, config))
        proc = subprocess.run(
            [sys.executable, "-m", "viewwarp"] + self.args_for(root) + ["--out", "-"],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.decode("utf-8") == expected
        assert "pairs kept" in proc.stderr.decode("utf-8")


class TestStdoutStreams:
    def test_png_bytes_are_uncontaminated(self, tmp_path, rng):
        holes = rng.uniform(size=(40, 50)) < 0.1
        mask_path = tmp_path / "m.png"
        vio.save_mask(mask_path, OcclusionMask(holes))
        proc = subprocess.run(
            [sys.executable, "-m", "viewwarp", "mask-filter",
             "--mask", str(mask_path), "--min-size", "8", "--out", "-"],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith(b"\x89PNG")
        loaded = np.asarray(Image.open(stdio.BytesIO(proc.stdout)).convert("L")) >= 128
        expected = filter_occlusion_mask(OcclusionMask(holes), 8).holes
        assert np.array_equal(loaded, expected)


class TestConfigMerge:
    def embed_args(self, scene_dir, out):
        return ["embed", "--depth", str(scene_dir / "view0.dpt"),
                "--camera", str(scene_dir / "relative.json"),
                "--scale", "8", "--out", str(out)]

    def test_config_supplies_defaults(self, scene_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"bands": 2}))
        out = tmp_path / "emb.dpt"
        assert cli.main(self.embed_args(scene_dir, out)
                        + ["--config", str(config)]) == 0
        assert vio.load_planes(out).shape[2] == 8

    def test_explicit_flag_beats_config(self, scene_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"bands": 2}))
        out = tmp_path / "emb.dpt"
        assert cli.main(self.embed_args(scene_dir, out)
                        + ["--config", str(config), "--bands", "3"]) == 0
        assert vio.load_planes(out).shape[2] == 12

    def test_unknown_config_key_is_a_usage_error(self, scene_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"bandz": 2}))
        assert cli.main(self.embed_args(scene_dir, tmp_path / "e.dpt")
                        + ["--config", str(config)]) == 2

    def test_malformed_config_is_a_usage_error(self, scene_dir, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text("[1, 2, 3]")
        args = self.embed_args(scene_dir, tmp_path / "e.dpt")
        assert cli.main(args + ["--config", str(config)]) == 2
        config.write_text("{not json")
        assert cli.main(args + ["--config", str(config)]) == 2
        assert cli.main(args + ["--config", str(tmp_path / "missing.json")]) == 2


class TestExitCodes:
    def test_no_subcommand_prints_help_and_exits_2(self, capsys):
        assert cli.main([]) == 2
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "usage" in captured.err

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["warp", "--bogus"])
        assert excinfo.value.code == 2

    def test_missing_input_file_exits_1(self, tmp_path):
        assert cli.main([
            "warp", "--image", str(tmp_path / "nope.png"),
            "--depth", str(tmp_path / "nope.dpt"),
            "--camera", str(tmp_path / "nope.json"),
            "--out", str(tmp_path / "out.png"),
        ]) == 1

    def test_bad_size_exits_2(self, tmp_path):
        assert cli.main(["synth", "--scene", "plane", "--size", "huge",
                         "--out", str(tmp_path)]) == 2

    def test_unknown_check_number_exits_2(self):
        assert cli.main(["selftest", "--only", "99"]) == 2


class TestSelftestCommand:
    def test_single_check_passes(self, capsys):
        assert cli.main(["selftest", "--only", "6"]) == 0
        out = capsys.readouterr().out
        assert "[PASS] 6." in out
        assert "all checks passed" in out

    def test_failing_check_exits_1(self, capsys, monkeypatch):
        def explode():
            raise selfcheck.CheckFailure("deliberately broken")

        monkeypatch.setattr(selfcheck, "CHECKS",
                            [(1, "always fails", explode)])
        assert cli.main(["selftest"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] 1." in out
        assert "deliberately broken" in out


class TestHelpAndDocs:
    def test_all_commands_registered_with_config_support(self):
        parser, registry = cli.build_parser()
        assert set(registry) == ALL_COMMANDS
        for name, sub in registry.items():
            help_text = sub.format_help()
            assert "--config" in help_text, name

    def test_every_flag_is_documented(self):
        _, registry = cli.build_parser()
        for name, sub in registry.items():
            for action in sub._actions:
                if action.option_strings:
                    assert action.help, f"{name} {action.option_strings}"

    def test_main_help_documents_file_formats(self):
        parser, _ = cli.build_parser()
        text = parser.format_help()
        for token in ("DPT1", "MCH1", "manifest"):
            assert token in text
