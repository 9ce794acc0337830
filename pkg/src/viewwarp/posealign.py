"""Relative pose recovery from depth and 2D-2D matches.

Source-view matches are lifted to 3D with the source depth map, giving
3D-2D correspondences into the target view. A direct linear transform
initializes the pose, iterative refinement polishes it, and a RANSAC loop
makes the estimate robust to bad matches. The recovered translation is in
depth units: scaling the depth map by s scales the translation by s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientInliers,
    InvalidDepthAtMatch,
    NoConvergence,
)
from .geometry import MIN_DEPTH, CameraIntrinsics, PixelCoord, RigidPose, unproject
from .warpcore import DepthMap

MINIMAL_SAMPLE = 6


@dataclass(frozen=True)
class Correspondence:
    """A source-frame 3D point observed at a target-view pixel."""

    point3d: np.ndarray
    point2d: PixelCoord
    weight: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.point3d, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("3D point contains NaN or Inf")
        if p[2] <= 0:
            raise ValueError(f"3D point must lie in front of the camera, got z={p[2]}")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError(f"weight must be finite and non-negative, got {self.weight}")
        object.__setattr__(self, "point3d", p)
        object.__setattr__(self, "point2d", PixelCoord(float(self.point2d[0]), float(self.point2d[1])))


@dataclass(frozen=True)
class PoseEstimate:
    """Robust-fit result: pose, the indices it explains, and their RMSE."""

    pose: RigidPose
    inliers: np.ndarray = field(repr=False)
    reprojection_rmse: float = 0.0

    def __post_init__(self):
        inliers = np.asarray(self.inliers, dtype=np.int64)
        object.__setattr__(self, "inliers", inliers)


def _as_arrays(correspondences) -> tuple[np.ndarray, np.ndarray]:
    pts = np.stack([c.point3d for c in correspondences])
    pix = np.array([[c.point2d.u, c.point2d.v] for c in correspondences])
    return pts, pix


def reprojection_errors(
    pose: RigidPose, correspondences, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Pixel distance between each projected 3D point and its observation.

    Points that land at or behind the camera get infinite error.
    """
    pts, pix = _as_arrays(correspondences)
    moved = pose.apply(pts)
    z = moved[:, 2]
    errs = np.full(len(correspondences), np.inf)
    front = z > MIN_DEPTH
    if front.any():
        u = intrinsics.fx * moved[front, 0] / z[front] + intrinsics.cx
        v = intrinsics.fy * moved[front, 1] / z[front] + intrinsics.cy
        errs[front] = np.hypot(u - pix[front, 0], v - pix[front, 1])
    return errs


def _dlt(pts: np.ndarray, pix: np.ndarray, intrinsics: CameraIntrinsics) -> RigidPose:
    """Direct linear transform on intrinsics-normalized observations."""
    n = pts.shape[0]
    xn = (pix[:, 0] - intrinsics.cx) / intrinsics.fx
    yn = (pix[:, 1] - intrinsics.cy) / intrinsics.fy
    hom = np.concatenate([pts, np.ones((n, 1))], axis=1)
    a = np.zeros((2 * n, 12))
    a[0::2, 0:4] = hom
    a[0::2, 8:12] = -xn[:, None] * hom
    a[1::2, 4:8] = hom
    a[1::2, 8:12] = -yn[:, None] * hom
    _, s, vt = np.linalg.svd(a)
    if s[0] <= 0 or s[-2] / s[0] < 1e-9:
        raise DegenerateConfiguration("correspondences do not constrain a unique pose")
    p = vt[-1].reshape(3, 4)
    m = p[:, :3]
    if np.linalg.det(m) < 0:
        p = -p
        m = -m
    u, sv, wt = np.linalg.svd(m)
    if sv[-1] / sv[0] < 1e-9:
        raise DegenerateConfiguration("recovered projection is rank deficient")
    r = u @ wt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ wt
    scale = sv.mean()
    return RigidPose(r, p[:, 3] / scale)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def _orthonormal_pose(rotation: np.ndarray, translation: np.ndarray) -> RigidPose:
    """Snap an almost-orthonormal rotation back onto SO(3)."""
    u, _, wt = np.linalg.svd(rotation)
    r = u @ wt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ wt
    return RigidPose(r, translation)


def _refine(
    rotation: np.ndarray,
    translation: np.ndarray,
    pts: np.ndarray,
    pix: np.ndarray,
    intrinsics: CameraIntrinsics,
    weights: np.ndarray,
    max_iterations: int,
    step_tol: float,
) -> RigidPose:
    """Damped Gauss-Newton on pixel residuals over (rotation, translation).

    The rotation update is a left-multiplied axis-angle increment.
    """
    from .geometry import rotation_from_axis_angle

    r = rotation.copy()
    t = translation.copy()
    sw = np.sqrt(weights)

    def residuals(r, t):
        rotated = pts @ r.T
        moved = rotated + t
        z = moved[:, 2]
        if np.any(z <= MIN_DEPTH):
            return None, None, None
        u = intrinsics.fx * moved[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * moved[:, 1] / z + intrinsics.cy
        res = np.stack([u - pix[:, 0], v - pix[:, 1]], axis=1) * sw[:, None]
        return res.ravel(), rotated, moved

    res, rotated, moved = residuals(r, t)
    if res is None:
        raise DegenerateConfiguration("initial pose places points behind the camera")
    cost = float(res @ res)
    damping = 1e-6

    for _ in range(max_iterations):
        n = pts.shape[0]
        x, y, z = moved[:, 0], moved[:, 1], moved[:, 2]
        # du/dp and dv/dp for p the transformed point
        j_proj = np.zeros((n, 2, 3))
        j_proj[:, 0, 0] = intrinsics.fx / z
        j_proj[:, 0, 2] = -intrinsics.fx * x / z**2
        j_proj[:, 1, 1] = intrinsics.fy / z
        j_proj[:, 1, 2] = -intrinsics.fy * y / z**2
        # d(moved)/d(axis-angle) = -[rotated]_x, d(moved)/dt = I
        j_rot = -np.einsum("nij,njk->nik", j_proj, np.stack([_skew(p) for p in rotated]))
        j = np.concatenate([j_rot, j_proj], axis=2) * sw[:, None, None]
        j = j.reshape(2 * n, 6)

        g = j.T @ res
        h = j.T @ j
        accepted = False
        # enough damping escalations to pinch the step below step_tol even
        # from a converged state where no strict cost reduction exists
        for _ in range(24):
            try:
                step = np.linalg.solve(h + damping * np.eye(6), -g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            # a vanishing update means the solution cannot move: converged,
            # whether or not the last residual can still be shaved
            if np.linalg.norm(step) < step_tol:
                return _orthonormal_pose(r, t)
            r_new = rotation_from_axis_angle(step[:3]) @ r
            t_new = t + step[3:]
            res_new, rotated_new, moved_new = residuals(r_new, t_new)
            if res_new is not None and float(res_new @ res_new) <= cost:
                accepted = True
                break
            damping *= 10
        if not accepted:
            raise NoConvergence("refinement could not reduce the reprojection error")
        r, t = r_new, t_new
        res, rotated, moved = res_new, rotated_new, moved_new
        cost = float(res @ res)
        damping = max(damping / 3, 1e-12)
        if np.linalg.norm(step) < step_tol:
            return _orthonormal_pose(r, t)
    raise NoConvergence(f"no convergence within {max_iterations} iterations")


def solve_pnp(
    correspondences,
    intrinsics: CameraIntrinsics,
    weights: np.ndarray | None = None,
    max_iterations: int = 50,
    step_tol: float = 1e-10,
) -> RigidPose:
    """Pose from at least 6 (3D point, 2D observation) pairs.

    A direct linear transform gives the starting point; damped
    Gauss-Newton on pixel reprojection residuals polishes it. Optional
    per-correspondence ``weights`` turn the polish into weighted least
    squares (the linear initialization ignores them).

    Raises DegenerateConfiguration for rank-deficient geometry (e.g. all
    points coplanar) and NoConvergence if refinement stalls.
    """
    if len(correspondences) < MINIMAL_SAMPLE:
        raise ValueError(
            f"need at least {MINIMAL_SAMPLE} correspondences, got {len(correspondences)}"
        )
    pts, pix = _as_arrays(correspondences)
    if weights is None:
        w = np.ones(len(correspondences))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(correspondences),):
            raise ValueError(f"weights shape {w.shape} != ({len(correspondences)},)")
        if not np.all((w >= 0) & np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("weights must be finite, non-negative, not all zero")
    initial = _dlt(pts, pix, intrinsics)
    return _refine(
        initial.rotation, initial.translation, pts, pix, intrinsics, w, max_iterations, step_tol
    )


def pnp_ransac(
    correspondences,
    intrinsics: CameraIntrinsics,
    inlier_threshold: float = 2.0,
    confidence: float = 0.999,
    seed: int = 0,
    max_iterations: int = 1000,
) -> PoseEstimate:
    """Robust pose fit: RANSAC over minimal 6-point samples plus a refit.

    The iteration budget adapts to the best inlier ratio seen so far (the
    standard 1 - (1 - w^6)^N argument at the requested ``confidence``),
    capped at ``max_iterations``. Ties between hypotheses with equal
    inlier counts keep the earlier sample, and the generator is seeded, so
    results are reproducible. The best consensus set is refit with the
    full solver, inliers are recomputed with the refit pose, and fewer
    than 6 final inliers raises InsufficientInliers.
    """
    n = len(correspondences)
    if n < MINIMAL_SAMPLE:
        raise ValueError(f"need at least {MINIMAL_SAMPLE} correspondences, got {n}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    rng = np.random.default_rng(seed)

    best_count = 0
    best_inliers: np.ndarray | None = None
    needed = max_iterations
    it = 0
    while it < needed:
        sample = rng.choice(n, size=MINIMAL_SAMPLE, replace=False)
        it += 1
        try:
            pose = solve_pnp([correspondences[k] for k in sample], intrinsics)
        except (DegenerateConfiguration, NoConvergence):
            continue
        errs = reprojection_errors(pose, correspondences, intrinsics)
        inliers = np.flatnonzero(errs <= inlier_threshold)
        if inliers.size > best_count:
            best_count = inliers.size
            best_inliers = inliers
            ratio = inliers.size / n
            miss = 1.0 - ratio**MINIMAL_SAMPLE
            if miss <= 0:
                needed = it
            else:
                needed = min(
                    max_iterations, math.ceil(math.log(1.0 - confidence) / math.log(miss))
                )

    if best_inliers is None or best_count < MINIMAL_SAMPLE:
        raise InsufficientInliers(f"best consensus has {best_count} inliers, need 6")

    refit = solve_pnp([correspondences[k] for k in best_inliers], intrinsics)
    errs = reprojection_errors(refit, correspondences, intrinsics)
    final = np.flatnonzero(errs <= inlier_threshold)
    if final.size < MINIMAL_SAMPLE:
        raise InsufficientInliers(f"refit keeps {final.size} inliers, need 6")
    rmse = float(np.sqrt(np.mean(errs[final] ** 2)))
    return PoseEstimate(refit, final, rmse)


def depth_to_correspondences(
    depth: DepthMap,
    matches: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> list[Correspondence]:
    """Lift source-view match pixels to 3D using the source depth map.

    ``matches`` rows are (u_i, v_i, u_j, v_j) or (u_i, v_i, u_j, v_j,
    weight); depth is looked up at the pixel containing (u_i, v_i) and the
    continuous match coordinate is unprojected with it. A match outside
    the image or on an invalid depth pixel raises InvalidDepthAtMatch.
    """
    matches = np.asarray(matches, dtype=np.float64)
    if matches.ndim != 2 or matches.shape[1] not in (4, 5):
        raise ValueError(f"matches must be (N, 4) or (N, 5), got {matches.shape}")
    h, w = depth.shape
    out = []
    for row in matches:
        u_i, v_i, u_j, v_j = row[:4]
        weight = float(row[4]) if matches.shape[1] == 5 else 1.0
        col, line = int(np.floor(u_i)), int(np.floor(v_i))
        if not (0 <= col < w and 0 <= line < h):
            raise InvalidDepthAtMatch(f"match pixel ({u_i}, {v_i}) outside {w}x{h}")
        if not depth.valid[line, col]:
            raise InvalidDepthAtMatch(f"no valid depth at pixel ({col}, {line})")
        point = unproject(np.array([u_i, v_i]), depth.values[line, col], intrinsics)
        out.append(Correspondence(point, PixelCoord(float(u_j), float(v_j)), weight))
    return out
