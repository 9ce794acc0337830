"""Synthetic plane scenes with analytic depth, plus independent brute-force
oracles used by the test suite and the selftest command.

Scenes are collections of (optionally bounded) textured planes viewed by
pinhole cameras, so every rendered depth, every warp, and every homography
has a closed form to check against. The oracle functions here deliberately
avoid the library's own code paths: reprojection is a single homogeneous
4x4 matrix product, resampling goes through scipy, attention is a plain
Python softmax, and pose fitting is a coarse grid search plus a generic
least-squares polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage

from .geometry import (
    MIN_DEPTH,
    CameraIntrinsics,
    RigidPose,
    compose,
    pixel_centers,
    rotation_from_axis_angle,
    unproject,
)
from .warpcore import DepthMap, FeatureGrid, OcclusionMask

RAY_EPS = 1e-9


@dataclass(frozen=True)
class PlanePrimitive:
    """Plane {X : normal . X = offset} with a texture and optional bounds.

    ``texture`` maps world points (..., 3) to (..., C) values in [0, 1];
    ``bounds`` (if given) maps world points to a boolean hit filter.
    """

    normal: np.ndarray
    offset: float
    texture: Callable[[np.ndarray], np.ndarray]
    bounds: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)


@dataclass(frozen=True)
class SyntheticScene:
    """Plane primitives in world units plus world-to-camera extrinsics."""

    primitives: list[PlanePrimitive]
    cameras: list[tuple[CameraIntrinsics, RigidPose]] = field(default_factory=list)

    def relative_pose(self, source_index: int, target_index: int) -> RigidPose:
        """Transform taking source-camera points to target-camera points."""
        _, e_i = self.cameras[source_index]
        _, e_j = self.cameras[target_index]
        return compose(e_j, e_i.inverse())


class TraceResult(NamedTuple):
    points: np.ndarray  # (..., 3) world-frame hit points
    depth: np.ndarray  # (...) z-depths in the tracing camera
    hit: np.ndarray  # (...) primitive index, -1 for no hit
    valid: np.ndarray  # (...) booleans


def _intersect(primitives, origin: np.ndarray, dirs: np.ndarray) -> TraceResult:
    """Nearest plane hit along rays ``origin + s * dirs``.

    ``dirs`` must be z-normalized in the tracing camera's frame so that
    the ray parameter s equals that camera's z-depth.
    """
    s_best = np.full(dirs.shape[:-1], np.inf)
    hit = np.full(dirs.shape[:-1], -1, dtype=np.int64)
    for index, plane in enumerate(primitives):
        denom = dirs @ plane.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (plane.offset - origin @ plane.normal) / denom
        ok = (np.abs(denom) > 1e-12) & np.isfinite(s) & (s > RAY_EPS)
        if plane.bounds is not None:
            pts = origin + s[..., None] * dirs
            ok &= plane.bounds(pts)
        better = ok & (s < s_best)
        s_best[better] = s[better]
        hit[better] = index
    valid = hit >= 0
    points = origin + np.where(valid, s_best, 0.0)[..., None] * dirs
    return TraceResult(points, np.where(valid, s_best, 0.0), hit, valid)


def trace(scene: SyntheticScene, camera_index: int) -> TraceResult:
    """Exact per-pixel ray cast for one camera of the scene."""
    intrinsics, extrinsic = scene.cameras[camera_index]
    cam_to_world = extrinsic.inverse()
    centers = pixel_centers(intrinsics.width, intrinsics.height)
    dirs_cam = unproject(centers, np.ones(centers.shape[:2]), intrinsics)
    dirs_world = dirs_cam @ cam_to_world.rotation.T
    return _intersect(scene.primitives, cam_to_world.translation, dirs_world)


def _shade(scene: SyntheticScene, result: TraceResult) -> np.ndarray:
    channels = np.atleast_2d(scene.primitives[0].texture(np.zeros((1, 3)))).shape[-1]
    out = np.zeros(result.hit.shape + (channels,))
    for index, plane in enumerate(scene.primitives):
        sel = result.hit == index
        if sel.any():
            out[sel] = plane.texture(result.points[sel])
    return out


def render(scene: SyntheticScene, camera_index: int) -> tuple[FeatureGrid, DepthMap]:
    """Analytic render: nearest plane per pixel, exact z-depth, texture
    evaluated at the hit point. Pixels hitting nothing have invalid depth."""
    result = trace(scene, camera_index)
    values = _shade(scene, result)
    values[~result.valid] = 0.0
    return FeatureGrid(values), DepthMap(result.depth, result.valid)


def bruteforce_warp(
    scene: SyntheticScene, source_index: int, target_index: int
) -> tuple[FeatureGrid, OcclusionMask]:
    """Ground-truth warp by exact ray casting, with no splatting at all.

    Per target pixel: cast the target ray to its world hit point, project
    that point into the source camera, and ray-cast from the source toward
    it to decide visibility (exact z-buffer). Visible pixels take the
    texture value at the hit point; everything else is a hole.
    """
    k_src, e_src = scene.cameras[source_index]
    target = trace(scene, target_index)

    src_pts = e_src.apply(target.points)
    z_src = src_pts[..., 2]
    front = target.valid & (z_src > MIN_DEPTH)

    with np.errstate(divide="ignore", invalid="ignore"):
        u = k_src.fx * src_pts[..., 0] / z_src + k_src.cx
        v = k_src.fy * src_pts[..., 1] / z_src + k_src.cy
    in_frame = front & (u >= 0) & (u < k_src.width) & (v >= 0) & (v < k_src.height)

    cam_to_world = e_src.inverse()
    origin = cam_to_world.translation
    safe_z = np.where(front, z_src, 1.0)
    dirs_world = (target.points - origin) / safe_z[..., None]
    vis = _intersect(scene.primitives, origin, dirs_world)
    # the point itself lies on a primitive, so the nearest hit is at most
    # its own depth; strictly closer means something occludes it
    visible = in_frame & (vis.depth >= z_src * (1.0 - 1e-9))

    values = _shade(scene, target)
    values[~visible] = 0.0
    return FeatureGrid(values), OcclusionMask(~visible)


# ---------------------------------------------------------------------------
# texture and scene builders


def smooth_texture(wavelength: float, channels: int = 3, seed: int = 0):
    """Band-limited texture: per channel, a sum of two oblique sinusoids.

    ``wavelength`` is in world units (the shortest period present); values
    stay within [0.05, 0.95] so intensity comparisons have headroom.
    """
    rng = np.random.default_rng(seed)
    axes = rng.normal(size=(channels, 2, 3))
    axes /= np.linalg.norm(axes, axis=-1, keepdims=True)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(channels, 2))

    def texture(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        vals = []
        for c in range(channels):
            a = np.sin(2.0 * np.pi * (pts @ axes[c, 0]) / wavelength + phases[c, 0])
            b = np.sin(2.0 * np.pi * (pts @ axes[c, 1]) / (wavelength * 1.7) + phases[c, 1])
            vals.append(0.5 + 0.225 * (a + b))
        return np.stack(vals, axis=-1)

    return texture


def _frontal_plane(depth: float, texture) -> PlanePrimitive:
    return PlanePrimitive(np.array([0.0, 0.0, 1.0]), depth, texture)


def single_plane_scene(
    intrinsics: CameraIntrinsics,
    depth: float = 4.0,
    relative_pose: RigidPose | None = None,
    wavelength_px: float = 96.0,
    channels: int = 3,
    seed: int = 0,
) -> SyntheticScene:
    """Fronto-parallel plane at z=depth in the first camera's frame.

    The second camera is placed by ``relative_pose`` (identity when
    omitted); ``wavelength_px`` sets the texture period in source pixels.
    """
    wavelength = wavelength_px * depth / intrinsics.fx
    plane = _frontal_plane(depth, smooth_texture(wavelength, channels, seed))
    cams = [(intrinsics, RigidPose.identity()),
            (intrinsics, relative_pose or RigidPose.identity())]
    return SyntheticScene([plane], cams)


def rotation_pair_scene(
    intrinsics: CameraIntrinsics,
    axis_angle,
    depth: float = 4.0,
    wavelength_px: float = 96.0,
    seed: int = 0,
) -> SyntheticScene:
    """One plane viewed by two cameras sharing an origin (pure rotation)."""
    pose = RigidPose(rotation_from_axis_angle(np.asarray(axis_angle, dtype=np.float64)),
                     np.zeros(3))
    return single_plane_scene(intrinsics, depth, pose, wavelength_px, seed=seed)


def two_plane_scene(
    intrinsics: CameraIntrinsics,
    z_near: float = 2.0,
    z_far: float = 6.0,
    baseline: float = 0.5,
    square_size_px: float = 60.0,
    square_center_px: tuple[float, float] | None = None,
    wavelength_px: float = 96.0,
    channels: int = 3,
    seed: int = 0,
) -> SyntheticScene:
    """Near square occluding a far background, second camera shifted +x.

    The lateral move disoccludes a band whose width in pixels is the
    disparity difference fx * baseline * (1/z_near - 1/z_far).
    """
    if square_center_px is None:
        square_center_px = (intrinsics.cx, intrinsics.cy)
    cx_w = (square_center_px[0] - intrinsics.cx) * z_near / intrinsics.fx
    cy_w = (square_center_px[1] - intrinsics.cy) * z_near / intrinsics.fy
    half_w = 0.5 * square_size_px * z_near / intrinsics.fx
    half_h = 0.5 * square_size_px * z_near / intrinsics.fy

    def square_bounds(points: np.ndarray) -> np.ndarray:
        return (np.abs(points[..., 0] - cx_w) <= half_w) & (
            np.abs(points[..., 1] - cy_w) <= half_h
        )

    near_tex = smooth_texture(wavelength_px * z_near / intrinsics.fx, channels, seed + 1)
    far_tex = smooth_texture(wavelength_px * z_far / intrinsics.fx, channels, seed + 2)
    square = PlanePrimitive(np.array([0.0, 0.0, 1.0]), z_near, near_tex, square_bounds)
    background = _frontal_plane(z_far, far_tex)
    cams = [(intrinsics, RigidPose.identity()),
            (intrinsics, RigidPose(np.eye(3), np.array([-baseline, 0.0, 0.0])))]
    return SyntheticScene([square, background], cams)


def tilted_plane_scene(
    intrinsics: CameraIntrinsics,
    center_depth: float = 4.0,
    tilt: tuple[float, float] = (0.25, -0.15),
    relative_pose: RigidPose | None = None,
    wavelength_px: float = 96.0,
    seed: int = 0,
) -> SyntheticScene:
    """Plane tilted against the first camera; 1/depth varies linearly
    across the image."""
    normal = np.array([tilt[0], tilt[1], 1.0])
    normal /= np.linalg.norm(normal)
    offset = normal[2] * center_depth  # principal ray hits at z = center_depth
    wavelength = wavelength_px * center_depth / intrinsics.fx
    plane = PlanePrimitive(normal, offset, smooth_texture(wavelength, 3, seed))
    cams = [(intrinsics, RigidPose.identity()),
            (intrinsics, relative_pose or RigidPose.identity())]
    return SyntheticScene([plane], cams)


def disparity_band_width(intrinsics: CameraIntrinsics, baseline: float,
                         z_near: float, z_far: float) -> float:
    """Disocclusion band width in pixels for a lateral camera move."""
    return intrinsics.fx * baseline * (1.0 / z_near - 1.0 / z_far)


# ---------------------------------------------------------------------------
# independent oracles


def reproject_homogeneous(
    pixel, depth: float, pose: RigidPose, intrinsics: CameraIntrinsics
) -> np.ndarray | None:
    """Reprojection as one homogeneous 4x4 matrix product.

    Builds M = K4 . T . diag(d, d, d, 1) . K4^-1 and dehomogenizes by the
    third component; returns None when the point lands at or behind the
    target camera. Shares no code with the library's reprojection chain.
    """
    k4 = np.eye(4)
    k4[:3, :3] = intrinsics.matrix
    m = k4 @ pose.matrix4 @ np.diag([depth, depth, depth, 1.0]) @ np.linalg.inv(k4)
    q = m @ np.array([pixel[0], pixel[1], 1.0, 1.0])
    if q[2] <= MIN_DEPTH:
        return None
    return np.array([q[0] / q[2], q[1] / q[2]])


def homography_matrix(intrinsics: CameraIntrinsics, rotation: np.ndarray) -> np.ndarray:
    """Pixel map between two rotation-related views: K R K^-1."""
    k = intrinsics.matrix
    return k @ np.asarray(rotation, dtype=np.float64) @ np.linalg.inv(k)


def apply_homography(h: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Apply a 3x3 homography to (..., 2) pixel coordinates."""
    coords = np.asarray(coords, dtype=np.float64)
    hom = np.concatenate([coords, np.ones(coords.shape[:-1] + (1,))], axis=-1)
    mapped = hom @ h.T
    return mapped[..., :2] / mapped[..., 2:3]


def homography_resample(
    image: np.ndarray, h: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic warp oracle: gather the source at H^-1(target centers).

    Sampling is bilinear through scipy. Returns the resampled image and a
    mask of target pixels whose source footprint lies fully inside the
    frame (only those are meaningful for comparisons).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    height, width = image.shape[:2]
    centers = pixel_centers(width, height)
    src = apply_homography(np.linalg.inv(h), centers)
    rows = src[..., 1] - 0.5
    cols = src[..., 0] - 0.5
    out = np.stack(
        [
            ndimage.map_coordinates(image[:, :, c], [rows, cols], order=1, mode="nearest")
            for c in range(image.shape[2])
        ],
        axis=-1,
    )
    inside = (
        (src[..., 0] >= 0.5)
        & (src[..., 0] <= width - 0.5)
        & (src[..., 1] >= 0.5)
        & (src[..., 1] <= height - 0.5)
    )
    return out, inside


def attention_bruteforce(f_i, f_j, dim_head: int | None = None):
    """Plain-Python softmax-matmul attention over the concatenated keys.

    Returns (output, a_cross, a_self) computed with math.exp loops; no
    shared code with the library kernel.
    """
    f_i = [list(map(float, row)) for row in np.atleast_2d(f_i)] if np.size(f_i) else []
    f_j = [list(map(float, row)) for row in np.atleast_2d(f_j)]
    keys = f_i + f_j
    channels = len(f_j[0])
    scale = 1.0 / math.sqrt(float(dim_head if dim_head is not None else channels))
    m = len(f_i)
    output, a_cross, a_self = [], [], []
    for q in f_j:
        logits = [scale * sum(qc * kc for qc, kc in zip(q, k)) for k in keys]
        top = max(logits)
        exps = [math.exp(l - top) for l in logits]
        total = sum(exps)
        row = [e / total for e in exps]
        out_row = [
            sum(row[k] * keys[k][c] for k in range(len(keys))) for c in range(channels)
        ]
        output.append(out_row)
        a_cross.append(row[:m])
        a_self.append(row[m:])
    return np.array(output), np.array(a_cross).reshape(len(f_j), m), np.array(a_self)


def fourier_reference(coords: np.ndarray, num_bands: int) -> np.ndarray:
    """Direct per-element trig evaluation of the coordinate encoding."""
    coords = np.asarray(coords, dtype=np.float64)
    h, w = coords.shape[:2]
    out = np.zeros((h, w, 4 * num_bands))
    for row in range(h):
        for col in range(w):
            x, y = float(coords[row, col, 0]), float(coords[row, col, 1])
            for k in range(num_bands):
                f = math.pi * (2.0**k)
                out[row, col, 4 * k + 0] = math.sin(f * x)
                out[row, col, 4 * k + 1] = math.cos(f * x)
                out[row, col, 4 * k + 2] = math.sin(f * y)
                out[row, col, 4 * k + 3] = math.cos(f * y)
    return out


def pnp_bruteforce(
    correspondences,
    intrinsics: CameraIntrinsics,
    initial: RigidPose,
    rot_span: float = 0.05,
    trans_span: float = 0.1,
    steps: int = 3,
) -> RigidPose:
    """Pose oracle: coarse SE(3) grid around ``initial``, then a generic
    least-squares polish (scipy) on the best cell."""
    from scipy.optimize import least_squares

    pts = np.stack([c.point3d for c in correspondences])
    pix = np.array([[c.point2d.u, c.point2d.v] for c in correspondences])

    def residuals(params):
        rot = rotation_from_axis_angle(params[:3])
        moved = pts @ rot.T + params[3:]
        z = np.maximum(moved[:, 2], 1e-6)
        u = intrinsics.fx * moved[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * moved[:, 1] / z + intrinsics.cy
        return np.concatenate([u - pix[:, 0], v - pix[:, 1]])

    from .geometry import axis_angle_from_rotation

    w0 = axis_angle_from_rotation(initial.rotation)
    t0 = initial.translation
    offsets = np.linspace(-1.0, 1.0, steps)
    best_cost = np.inf
    best = np.concatenate([w0, t0])
    for dw in np.stack(np.meshgrid(*[offsets * rot_span] * 3), axis=-1).reshape(-1, 3):
        for dt in np.stack(np.meshgrid(*[offsets * trans_span] * 3), axis=-1).reshape(-1, 3):
            params = np.concatenate([w0 + dw, t0 + dt])
            r = residuals(params)
            cost = float(r @ r)
            if cost < best_cost:
                best_cost = cost
                best = params
    fit = least_squares(residuals, best, method="lm")
    return RigidPose(rotation_from_axis_angle(fit.x[:3]), fit.x[3:])
