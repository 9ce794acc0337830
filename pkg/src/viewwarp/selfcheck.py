"""Self-contained verification suite: each check pits a library code path
against an independently coded oracle or closed-form expectation, at the
tolerance the library promises. The `selftest` CLI subcommand runs all of
them and prints one pass/fail line each; the pytest acceptance tests run
the same functions.
"""

from __future__ import annotations

import importlib.resources
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import datapipe, synthoracle
from .attention import augmented_attention
from .coordembed import canonical_coords, fourier_encode, warped_coord_embedding
from .errors import BehindCamera
from .geometry import CameraIntrinsics, RigidPose, reproject, unproject
from .posealign import Correspondence, pnp_ransac
from .warpcore import (
    DepthMap,
    OcclusionMask,
    filter_occlusion_mask,
    forward_warp,
    inverse_warp,
)

HALF_LEVEL = 0.5 / 255.0


class CheckFailure(Exception):
    """A check's assertion with a human-readable reason."""


@dataclass(frozen=True)
class CheckResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise CheckFailure(message)


def check_reprojection_oracle() -> str:
    """10^4 random (pixel, depth, pose) samples vs the 4x4 matrix oracle."""
    rng = np.random.default_rng(11)
    intrinsics = CameraIntrinsics(fx=460.0, fy=430.0, cx=310.5, cy=235.25,
                                  width=640, height=480)
    n = 10_000
    rotvecs = rng.normal(size=(n, 3))
    rotvecs *= (rng.uniform(0.0, 0.4, n) / np.linalg.norm(rotvecs, axis=1))[:, None]
    translations = rng.normal(scale=0.35, size=(n, 3))
    depths = rng.uniform(0.5, 10.0, n)
    pixels = np.stack(
        [rng.uniform(0, intrinsics.width, n), rng.uniform(0, intrinsics.height, n)],
        axis=1,
    )

    poses = [RigidPose.from_axis_angle(rotvecs[i], translations[i]) for i in range(n)]

    start = time.perf_counter()
    produced = []
    for i in range(n):
        try:
            produced.append(reproject(pixels[i], depths[i], poses[i], intrinsics))
        except BehindCamera:
            produced.append(None)
    elapsed = time.perf_counter() - start

    worst = 0.0
    compared = 0
    for i, got in enumerate(produced):
        expected = synthoracle.reproject_homogeneous(pixels[i], depths[i], poses[i], intrinsics)
        if (expected is None) != (got is None):
            raise CheckFailure(
                f"behind-camera disagreement at sample {i}: oracle={expected}, impl={got}"
            )
        if expected is None:
            continue
        compared += 1
        worst = max(worst, float(np.hypot(got.u - expected[0], got.v - expected[1])))

    _require(compared >= 9000, f"only {compared} in-front samples")
    _require(worst < 1e-9, f"max deviation {worst:.3e} px exceeds 1e-9")
    _require(elapsed < 1.0, f"took {elapsed:.2f}s, budget 1s")
    return f"max |dx| = {worst:.2e} px over {compared} samples in {elapsed:.2f}s"


def check_homography_equivalence() -> str:
    """Rotation-only warps vs analytic K R K^-1 resampling at 512x384."""
    intrinsics = CameraIntrinsics(fx=420.0, fy=420.0, cx=256.0, cy=192.0,
                                  width=512, height=384)
    axis_angle = np.array([0.02, -0.035, 0.015])
    scene = synthoracle.rotation_pair_scene(intrinsics, axis_angle, depth=4.0,
                                            wavelength_px=96.0, seed=2)
    image, depth = synthoracle.render(scene, 0)
    relative = scene.relative_pose(0, 1)

    start = time.perf_counter()
    warped_f, mask_f = forward_warp(image, depth, relative, intrinsics)
    warped_i, mask_i = inverse_warp(image, depth, relative, intrinsics)
    elapsed = time.perf_counter() - start

    h = synthoracle.homography_matrix(intrinsics, relative.rotation)
    expected, inside = synthoracle.homography_resample(image.data, h)

    interior = inside & ~mask_f.holes & ~mask_i.holes
    interior = ndimage.binary_erosion(interior, iterations=3)
    interior[:3, :] = interior[-3:, :] = False
    interior[:, :3] = interior[:, -3:] = False
    _require(interior.sum() > 0.5 * interior.size, "interior region unexpectedly small")

    diff_f = float(np.abs(warped_f.data - expected)[interior].max())
    diff_i = float(np.abs(warped_i.data - expected)[interior].max())
    _require(diff_f <= HALF_LEVEL, f"forward warp off by {diff_f * 255:.3f} levels")
    _require(diff_i <= HALF_LEVEL, f"inverse warp off by {diff_i * 255:.3f} levels")
    _require(elapsed < 5.0, f"took {elapsed:.2f}s, budget 5s")
    return (
        f"forward {diff_f * 255:.3f} / inverse {diff_i * 255:.3f} levels "
        f"on {int(interior.sum())} px in {elapsed:.2f}s"
    )


def check_occlusion_band() -> str:
    """Two-plane scene: mask vs exact z-buffer oracle and band width."""
    intrinsics = CameraIntrinsics(fx=120.0, fy=120.0, cx=96.0, cy=72.0,
                                  width=192, height=144)
    z_near, z_far, baseline = 2.0, 6.0, 0.5
    scene = synthoracle.two_plane_scene(intrinsics, z_near, z_far, baseline,
                                        square_size_px=60.0, seed=4)
    image, depth = synthoracle.render(scene, 0)
    relative = scene.relative_pose(0, 1)
    _, mask = forward_warp(image, depth, relative, intrinsics)
    _, oracle_mask = synthoracle.bruteforce_warp(scene, 0, 1)

    inter = float(np.logical_and(mask.holes, oracle_mask.holes).sum())
    union = float(np.logical_or(mask.holes, oracle_mask.holes).sum())
    _require(union > 0, "no holes produced at all")
    iou = inter / union
    _require(iou >= 0.95, f"mask IoU {iou:.4f} < 0.95")

    expected = synthoracle.disparity_band_width(intrinsics, baseline, z_near, z_far)
    widths = []
    for row in mask.holes:
        runs = _hole_runs(row)
        interior_runs = [stop - start for start, stop in runs
                         if start > 0 and stop < row.size]
        if interior_runs:
            widths.append(max(interior_runs))
    _require(bool(widths), "no interior disocclusion band found")
    measured = float(np.median(widths))
    _require(
        abs(measured - expected) <= 1.0,
        f"band width {measured:.2f} px vs formula {expected:.2f} px",
    )
    return f"IoU {iou:.4f}; band {measured:.1f} px vs formula {expected:.1f} px"


def _hole_runs(row: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate([[False], row, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[0::2], edges[1::2]))


def check_mask_filter_rule() -> str:
    """1000 random masks: expansion to >= 8x8, superset, idempotence."""
    rng = np.random.default_rng(13)
    min_size = 8
    for trial in range(1000):
        h = int(rng.integers(12, 64))
        w = int(rng.integers(12, 64))
        holes = rng.random((h, w)) < rng.uniform(0.01, 0.12)
        if trial % 3 == 0:
            y, x = int(rng.integers(0, h - 4)), int(rng.integers(0, w - 4))
            holes[y : y + int(rng.integers(1, 5)), x : x + int(rng.integers(1, 5))] = True
        mask = OcclusionMask(holes)
        filtered = filter_occlusion_mask(mask, min_size)
        _require(
            bool(np.all(filtered.holes >= mask.holes)),
            f"trial {trial}: filter cleared a hole pixel",
        )
        again = filter_occlusion_mask(filtered, min_size)
        _require(
            bool(np.array_equal(again.holes, filtered.holes)),
            f"trial {trial}: filter is not idempotent",
        )
        labels, count = ndimage.label(filtered.holes)
        for sl in ndimage.find_objects(labels):
            box_h = sl[0].stop - sl[0].start
            box_w = sl[1].stop - sl[1].start
            _require(
                box_h >= min(min_size, h) and box_w >= min(min_size, w),
                f"trial {trial}: component box {box_h}x{box_w} below minimum",
            )
    return "1000 random masks: superset, idempotent, all boxes >= 8x8"


def check_embedding_suite() -> str:
    """Identity-pose equality, bounded range, and the trig oracle."""
    rng = np.random.default_rng(19)
    intrinsics = CameraIntrinsics(fx=60.0, fy=60.0, cx=24.0, cy=18.0, width=48, height=36)
    depth = DepthMap.from_values(rng.uniform(2.0, 6.0, (36, 48)))
    warped, mask = warped_coord_embedding(depth, RigidPose.identity(), intrinsics)
    plain = fourier_encode(canonical_coords(48, 36))
    identity_diff = float(np.abs(warped.data - plain.data).max())
    _require(identity_diff <= 1e-6, f"identity embedding off by {identity_diff:.2e}")
    _require(mask.count() == 0, f"identity warp produced {mask.count()} holes")

    rotated = synthoracle.rotation_pair_scene(intrinsics, [0.0, 0.03, 0.01], depth=4.0)
    _, scene_depth = synthoracle.render(rotated, 0)
    moved, _ = warped_coord_embedding(scene_depth, rotated.relative_pose(0, 1), intrinsics)
    lo, hi = float(moved.data.min()), float(moved.data.max())
    _require(-1.0 <= lo and hi <= 1.0, f"warped embedding range [{lo:.3f}, {hi:.3f}]")

    from .coordembed import CoordinateMap

    coords = CoordinateMap(rng.uniform(-1.0, 1.0, (12, 16, 2)))
    encoded = fourier_encode(coords, num_bands=6)
    reference = synthoracle.fourier_reference(coords.coords, 6)
    trig_diff = float(np.abs(encoded.data - reference).max())
    _require(trig_diff <= 1e-12, f"encoder deviates from direct trig by {trig_diff:.2e}")
    return (
        f"identity |dx| {identity_diff:.1e}; range [{lo:.2f}, {hi:.2f}]; "
        f"trig |dx| {trig_diff:.1e}"
    )


def check_attention_oracle() -> str:
    """Kernel vs plain-Python oracle, shift invariance, exact 0.5 split."""
    rng = np.random.default_rng(23)
    worst = 0.0
    worst_row = 0.0
    shapes = [(0, 1), (0, 8), (1, 1), (2, 2), (3, 5), (8, 8), (16, 16),
              (32, 32), (40, 24), (63, 1), (1, 63), (20, 44), (32, 16)]
    for m, n in shapes:
        f_i = rng.normal(size=(m, 7))
        f_j = rng.normal(size=(n, 7))
        result = augmented_attention(f_i, f_j)
        out, a_cross, a_self = synthoracle.attention_bruteforce(f_i, f_j)
        worst = max(
            worst,
            float(np.abs(result.output - out).max()),
            float(np.abs(result.a_cross - a_cross).max(initial=0.0)),
            float(np.abs(result.a_self - a_self).max()),
        )
        rows = result.a_cross.sum(axis=-1) + result.a_self.sum(axis=-1)
        worst_row = max(worst_row, float(np.abs(rows - 1.0).max()))
    _require(worst <= 1e-10, f"oracle deviation {worst:.2e} exceeds 1e-10")
    _require(worst_row <= 1e-6, f"row sums off by {worst_row:.2e}")

    # shift invariance: all tokens carry a bias channel fixed at 1, so adding
    # a random last column to w_q shifts each query's logits by a per-row
    # constant, which softmax must ignore
    m, n, c = 6, 5, 8
    f_i = np.concatenate([rng.normal(size=(m, c)), np.ones((m, 1))], axis=1)
    f_j = np.concatenate([rng.normal(size=(n, c)), np.ones((n, 1))], axis=1)
    base = augmented_attention(f_i, f_j)
    w_q = np.eye(c + 1)
    w_q[:, c] += rng.normal(scale=3.0, size=c + 1)
    shifted = augmented_attention(f_i, f_j, w_q=w_q)
    shift_diff = max(
        float(np.abs(base.a_cross - shifted.a_cross).max()),
        float(np.abs(base.a_self - shifted.a_self).max()),
    )
    _require(shift_diff <= 1e-9, f"logit shift moved attention by {shift_diff:.2e}")

    token = rng.normal(size=(1, 7))
    split = augmented_attention(token, token.copy())
    _require(
        float(split.a_cross[0, 0]) == 0.5 and float(split.a_self[0, 0]) == 0.5,
        f"single-token split {split.a_cross[0, 0]}/{split.a_self[0, 0]} not exactly 0.5",
    )
    return f"oracle |dx| {worst:.1e}; shift |dx| {shift_diff:.1e}; split exact"


def check_attention_hole_margin() -> str:
    """Hole queries must put more mass on self-attention than warped ones."""
    intrinsics = CameraIntrinsics(fx=60.0, fy=60.0, cx=24.0, cy=18.0, width=48, height=36)
    scene = synthoracle.two_plane_scene(intrinsics, z_near=2.0, z_far=6.0,
                                        baseline=0.35, square_size_px=16.0, seed=6)
    _, depth = synthoracle.render(scene, 0)
    warped, mask = warped_coord_embedding(depth, scene.relative_pose(0, 1), intrinsics)
    tokens_j = warped.data.reshape(-1, warped.channels)
    tokens_i = fourier_encode(canonical_coords(48, 36)).data.reshape(-1, warped.channels)

    result = augmented_attention(tokens_i, tokens_j)
    self_mass = result.self_mass()
    holes = mask.holes.ravel()
    _require(int(holes.sum()) >= 20, f"only {int(holes.sum())} hole tokens in the scene")
    hole_mean = float(self_mass[holes].mean())
    warped_mean = float(self_mass[~holes].mean())
    margin = hole_mean - warped_mean
    _require(
        margin > 0.0,
        f"hole self-mass {hole_mean:.4f} not above warped self-mass {warped_mean:.4f}",
    )
    return (
        f"self-mass: holes {hole_mean:.4f} vs warped {warped_mean:.4f} "
        f"(margin {margin:.4f}, {int(holes.sum())} hole tokens)"
    )


def _random_pose_scene(rng, intrinsics, n, pose):
    pixels = np.stack(
        [rng.uniform(20, intrinsics.width - 20, n), rng.uniform(20, intrinsics.height - 20, n)],
        axis=1,
    )
    depths = rng.uniform(2.0, 8.0, n)
    points = unproject(pixels, depths, intrinsics)
    moved = pose.apply(points)
    obs = np.stack(
        [
            intrinsics.fx * moved[:, 0] / moved[:, 2] + intrinsics.cx,
            intrinsics.fy * moved[:, 1] / moved[:, 2] + intrinsics.cy,
        ],
        axis=1,
    )
    return points, obs


def _pose_errors(estimate: RigidPose, truth: RigidPose) -> tuple[float, float]:
    rot = float(np.linalg.norm(estimate.rotation - truth.rotation))
    scale = float(np.linalg.norm(truth.translation))
    trans = float(np.linalg.norm(estimate.translation - truth.translation)) / max(scale, 1e-12)
    return rot, trans


def check_pnp_suite() -> str:
    """Noiseless recovery, 30% outliers, and the depth-scale property."""
    rng = np.random.default_rng(17)
    intrinsics = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0,
                                  width=640, height=480)
    truth = RigidPose.from_axis_angle([0.04, -0.09, 0.02], [0.3, -0.1, 0.15])

    points, obs = _random_pose_scene(rng, intrinsics, 80, truth)
    corrs = [Correspondence(p, (o[0], o[1])) for p, o in zip(points, obs)]
    clean = pnp_ransac(corrs, intrinsics, seed=3)
    rot_err, trans_err = _pose_errors(clean.pose, truth)
    _require(rot_err <= 1e-6, f"noiseless rotation error {rot_err:.2e}")
    _require(trans_err <= 1e-6, f"noiseless translation error {trans_err:.2e}")

    points2, obs2 = _random_pose_scene(rng, intrinsics, 100, truth)
    outliers = rng.choice(100, size=30, replace=False)
    for k in outliers:
        angle = rng.uniform(0, 2 * np.pi)
        radius = rng.uniform(8.0, 40.0)
        obs2[k] += [radius * np.cos(angle), radius * np.sin(angle)]
    corrupt = [Correspondence(p, (o[0], o[1])) for p, o in zip(points2, obs2)]
    robust = pnp_ransac(corrupt, intrinsics, inlier_threshold=2.0, seed=5)
    true_inliers = sorted(set(range(100)) - set(int(k) for k in outliers))
    _require(
        [int(k) for k in robust.inliers] == true_inliers,
        f"inlier set mismatch: {len(robust.inliers)} found vs {len(true_inliers)} true",
    )
    rot_err2, trans_err2 = _pose_errors(robust.pose, truth)
    _require(
        rot_err2 < 1e-4 and trans_err2 < 1e-4,
        f"outlier-case pose error rot {rot_err2:.2e} / trans {trans_err2:.2e}",
    )

    s = 3.7
    scaled = [Correspondence(p * s, (o[0], o[1])) for p, o in zip(points, obs)]
    scaled_fit = pnp_ransac(scaled, intrinsics, seed=3)
    rot_drift = float(np.linalg.norm(scaled_fit.pose.rotation - clean.pose.rotation))
    trans_target = s * clean.pose.translation
    trans_drift = float(
        np.linalg.norm(scaled_fit.pose.translation - trans_target)
    ) / float(np.linalg.norm(trans_target))
    _require(rot_drift <= 1e-6, f"rotation moved {rot_drift:.2e} under depth scaling")
    _require(trans_drift <= 1e-6, f"translation not scaled by s: drift {trans_drift:.2e}")
    return (
        f"noiseless ({rot_err:.1e}, {trans_err:.1e}); outlier pose "
        f"({rot_err2:.1e}, {trans_err2:.1e}) with exact inliers; scale drift {trans_drift:.1e}"
    )


def golden_manifest_bytes() -> bytes:
    resource = importlib.resources.files("viewwarp").joinpath("data/golden_manifest.jsonl")
    return resource.read_bytes()


def check_pipeline_determinism() -> str:
    """Fixture pipeline reproduces the golden manifest across runs/threads."""
    try:
        golden = golden_manifest_bytes()
    except FileNotFoundError:
        raise CheckFailure("golden manifest is not bundled")

    with tempfile.TemporaryDirectory(prefix="viewwarp-fixture-") as tmp:
        tmp = Path(tmp)
        outputs = []
        for label, threads, fresh in (("a", 1, True), ("a", 1, False), ("b", 4, True)):
            root = tmp / f"root_{label}"
            if fresh:
                datapipe.make_fixture(root)
            out = tmp / f"manifest_{label}_{threads}_{fresh}.jsonl"
            datapipe.build_manifest(root, datapipe.golden_config(threads=threads, out=str(out)))
            outputs.append(out.read_bytes())

    for k, blob in enumerate(outputs):
        _require(
            blob == golden,
            f"manifest {k} differs from golden ({len(blob)} vs {len(golden)} bytes)",
        )
    return f"3 builds (rerun + threads 1/4) identical to golden ({len(golden)} bytes)"


CHECKS = [
    (1, "reprojection agrees with homogeneous-matrix oracle", check_reprojection_oracle),
    (2, "rotation warps match analytic homography resampling", check_homography_equivalence),
    (3, "two-plane occlusion mask matches z-buffer oracle", check_occlusion_band),
    (4, "mask filter expands small holes, idempotently", check_mask_filter_rule),
    (5, "coordinate embedding identity/range/trig oracle", check_embedding_suite),
    (6, "attention kernel matches brute-force oracle", check_attention_oracle),
    (7, "hole queries favor self-attention mass", check_attention_hole_margin),
    (8, "pose recovery: noiseless, outliers, depth scale", check_pnp_suite),
    (9, "dataset pipeline reproduces golden manifest", check_pipeline_determinism),
]


def run_check(index: int, name: str, fn) -> CheckResult:
    start = time.perf_counter()
    try:
        detail = fn()
        passed = True
    except CheckFailure as exc:
        detail = str(exc)
        passed = False
    except Exception as exc:  # a crashed check is a failed check, not a crashed table
        detail = f"{type(exc).__name__}: {exc}"
        passed = False
    return CheckResult(index, name, passed, detail, time.perf_counter() - start)


def run_all() -> list[CheckResult]:
    return [run_check(index, name, fn) for index, name, fn in CHECKS]


def format_results(results) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"[{status}] {r.index}. {r.name} ({r.seconds:.2f}s) — {r.detail}")
    total = sum(r.seconds for r in results)
    failed = sum(1 for r in results if not r.passed)
    verdict = "all checks passed" if failed == 0 else f"{failed} check(s) FAILED"
    lines.append(f"{len(results)} checks in {total:.1f}s — {verdict}")
    return "\n".join(lines)
