"""Pinhole camera models, rigid transforms, and pixel reprojection.

Conventions used throughout the library:

* Continuous pixel coordinates place (0, 0) at the outer corner of the
  top-left pixel; the pixel with integer grid index (u, v) covers the unit
  square [u, u+1) x [v, v+1) and has its center at (u + 0.5, v + 0.5).
* Depth is z-depth along the optical axis, not ray length.
* A :class:`RigidPose` maps points expressed in the source camera frame to
  the target camera frame; no world frame is ever materialized.
* Points whose transformed z-depth falls at or below ``MIN_DEPTH`` are
  treated as behind the camera rather than clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BehindCamera, NonFinite

MIN_DEPTH = 1e-9
ORTHONORMAL_TOL = 1e-9


class PixelCoord(NamedTuple):
    """Continuous pixel location; may lie outside the image frame."""

    u: float
    v: float


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the image size they refer to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        """The 3x3 calibration matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for the same camera at ``factor`` times the resolution."""
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=max(1, int(round(self.width * factor))),
            height=max(1, int(round(self.height * factor))),
        )


@dataclass(frozen=True)
class RigidPose:
    """SE(3) transform: ``p_target = rotation @ p_source + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise NonFinite("pose contains NaN or Inf")
        if not np.allclose(r.T @ r, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal")
        if not np.isclose(np.linalg.det(r), 1.0, atol=ORTHONORMAL_TOL):
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis_angle, translation=(0.0, 0.0, 0.0)) -> "RigidPose":
        """Pose from a rotation vector (Rodrigues) and a translation."""
        return RigidPose(rotation_from_axis_angle(np.asarray(axis_angle, dtype=np.float64)),
                         np.asarray(translation, dtype=np.float64))

    def inverse(self) -> "RigidPose":
        return RigidPose(self.rotation.T, -self.rotation.T @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @property
    def matrix4(self) -> np.ndarray:
        """The 4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class RayGrid:
    """Per-pixel camera rays as (direction, moment) 6-vectors."""

    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 3 or g.shape[2] != 6:
            raise ValueError(f"ray grid must be HxWx6, got {g.shape}")
        norms = np.linalg.norm(g[..., :3], axis=-1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("ray directions are not unit norm")
        dots = np.einsum("hwc,hwc->hw", g[..., :3], g[..., 3:])
        if not np.allclose(dots, 0.0, atol=1e-6):
            raise ValueError("ray moments are not perpendicular to directions")
        object.__setattr__(self, "grid", g)

    @property
    def directions(self) -> np.ndarray:
        return self.grid[..., :3]

    @property
    def moments(self) -> np.ndarray:
        return self.grid[..., 3:]


def rotation_from_axis_angle(omega: np.ndarray) -> np.ndarray:
    """Rodrigues' formula; the zero vector yields the identity."""
    omega = np.asarray(omega, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        return np.eye(3)
    k = omega / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def axis_angle_from_rotation(r: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rotation_from_axis_angle`, stable near identity."""
    r = np.asarray(r, dtype=np.float64)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta < 1e-12:
        return np.zeros(3)
    axis_raw = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if np.pi - theta < 1e-6:
        # near 180 degrees the antisymmetric part vanishes; recover the axis
        # from the symmetric part instead
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        k = int(np.argmax(axis))
        if axis[k] > 0:
            axis = m[:, k] / axis[k]
        return theta * axis / np.linalg.norm(axis)
    return theta * axis_raw / np.linalg.norm(axis_raw)


def compose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Pose applying ``b`` first, then ``a``: ``compose(a, b).apply(p) == a.apply(b.apply(p))``."""
    return RigidPose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pixel_centers(width: int, height: int) -> np.ndarray:
    """(H, W, 2) array of continuous pixel-center coordinates."""
    u = np.arange(width, dtype=np.float64) + 0.5
    v = np.arange(height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def unproject(pixels: np.ndarray, depth: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Lift continuous pixel coordinates with z-depths to camera-frame 3D points.

    Parameters
    ----------
    pixels : (..., 2) continuous pixel coordinates.
    depth : (...) z-depths, broadcastable against the pixel batch.

    Returns
    -------
    (..., 3) camera-frame points.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (pixels[..., 0] - intrinsics.cx) / intrinsics.fx
    y = (pixels[..., 1] - intrinsics.cy) / intrinsics.fy
    return np.stack([x * depth, y * depth, depth * np.ones_like(x)], axis=-1)


def project(points: np.ndarray, intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Project camera-frame 3D points to continuous pixel coordinates.

    Returns the (..., 2) pixel coordinates and the (...) z-depths; callers
    decide how to treat non-positive depths.
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * points[..., 0] / z + intrinsics.cx
        v = intrinsics.fy * points[..., 1] / z + intrinsics.cy
    return np.stack([u, v], axis=-1), z


def reproject(
    x: PixelCoord | tuple[float, float],
    depth: float,
    pose: RigidPose,
    intrinsics: CameraIntrinsics,
) -> PixelCoord:
    """Map one pixel of the source view into the target view.

    Unprojects the continuous pixel ``x`` at its z-depth, applies ``pose``,
    and reprojects with the same intrinsics. The result is continuous-valued
    and may land outside the image frame.

    Raises
    ------
    NonFinite
        If ``x`` or ``depth`` contain NaN/Inf.
    BehindCamera
        If the transformed point has z-depth <= MIN_DEPTH.
    ValueError
        If ``depth`` is not positive.
    """
    u, v = float(x[0]), float(x[1])
    depth = float(depth)
    if not (np.isfinite(u) and np.isfinite(v) and np.isfinite(depth)):
        raise NonFinite(f"non-finite reprojection input: x=({u}, {v}), depth={depth}")
    if depth <= 0:
        raise ValueError(f"depth must be positive, got {depth}")
    point = unproject(np.array([u, v]), depth, intrinsics)
    moved = pose.apply(point)
    if moved[2] <= MIN_DEPTH:
        raise BehindCamera(f"transformed point has depth {moved[2]:.3e}")
    pixel, _ = project(moved, intrinsics)
    return PixelCoord(float(pixel[0]), float(pixel[1]))


def reproject_grid(
    depth: np.ndarray,
    pose: RigidPose,
    intrinsics: CameraIntrinsics,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`reproject` over every pixel center of a depth grid.

    Returns ``(coords, z)``: (H, W, 2) target pixel coordinates and (H, W)
    target-frame z-depths. No validity handling is done here; entries where
    ``z <= MIN_DEPTH`` hold unusable coordinates and must be masked by the
    caller.
    """
    h, w = depth.shape
    centers = pixel_centers(w, h)
    points = unproject(centers, depth, intrinsics)
    moved = pose.apply(points.reshape(-1, 3)).reshape(h, w, 3)
    coords, z = project(moved, intrinsics)
    return coords, z


def plucker_rays(intrinsics: CameraIntrinsics, pose: RigidPose) -> RayGrid:
    """Per-pixel (direction, moment) rays for the camera placed by ``pose``.

    ``pose`` maps camera-frame points into the shared reference frame, so
    the camera origin sits at ``pose.translation``. Directions are unit
    norm; moments are ``origin x direction``.
    """
    centers = pixel_centers(intrinsics.width, intrinsics.height)
    dirs_cam = unproject(centers, np.ones(centers.shape[:2]), intrinsics)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=-1, keepdims=True)
    dirs = dirs_cam @ pose.rotation.T
    origin = pose.translation
    moments = np.cross(np.broadcast_to(origin, dirs.shape), dirs)
    return RayGrid(np.concatenate([dirs, moments], axis=-1))
