"""Depth-based warping between views: flow fields, splatting, gathering,
occlusion masks, and the minimum-occlusion-size mask filter.

Forward warping scatters each source pixel to its continuous target location
with a bilinear footprint; depth conflicts are resolved by a softly
z-weighted average (nearer surfaces dominate). Inverse warping reconstructs
a dense inverse flow from the forward flow and gathers source colors per
target pixel, which interpolates across small gaps and therefore leaves
fewer holes.

All accumulation runs in a fixed order over numpy index arrays, so results
are deterministic regardless of caller threading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateSize, DimensionMismatch, NonFinite
from .geometry import MIN_DEPTH, CameraIntrinsics, RigidPose, pixel_centers, reproject_grid

# Accumulated bilinear footprint mass below this marks a target pixel as a
# hole; it is below the leakage any single full-weight splat can produce.
WEIGHT_EPSILON = 1e-4

# Contributions whose target depth exceeds the per-pixel minimum by more
# than this relative band lose the inverse-flow conflict.
DEPTH_BAND = 0.05

# Uncovered target pixels at most this far (euclidean) from covered ones
# are filled from their nearest covered neighbor during inverse warping.
MAX_FILL_DISTANCE = 2.0


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel z-depths with a validity mask and optional confidence."""

    values: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    confidence: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2:
            raise ValueError(f"depth values must be HxW, got {values.shape}")
        if valid.shape != values.shape:
            raise DimensionMismatch(f"valid mask {valid.shape} != values {values.shape}")
        ok = values[valid]
        if ok.size and not (np.all(np.isfinite(ok)) and np.all(ok > 0)):
            raise ValueError("valid depth pixels must be finite and positive")
        conf = self.confidence
        if conf is not None:
            conf = np.asarray(conf, dtype=np.float64)
            if conf.shape != values.shape:
                raise DimensionMismatch(f"confidence {conf.shape} != values {values.shape}")
            if not np.all((conf >= 0) & (conf <= 1)):
                raise ValueError("confidence must lie in [0, 1]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "confidence", conf)

    @staticmethod
    def from_values(values, confidence=None) -> "DepthMap":
        """Depth map whose validity is inferred: finite and positive."""
        values = np.asarray(values, dtype=np.float64)
        valid = np.isfinite(values) & (values > 0)
        return DepthMap(np.where(valid, values, 0.0), valid, confidence)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class FeatureGrid:
    """H x W x C grid of real-valued features (images, embeddings, rays)."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"feature grid must be HxWxC, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFinite("feature grid contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


@dataclass(frozen=True)
class FlowField:
    """Continuous target coordinates per source pixel."""

    target_coords: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def __post_init__(self):
        coords = np.asarray(self.target_coords, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if coords.ndim != 3 or coords.shape[2] != 2:
            raise ValueError(f"flow must be HxWx2, got {coords.shape}")
        if valid.shape != coords.shape[:2]:
            raise DimensionMismatch(f"valid mask {valid.shape} != flow {coords.shape[:2]}")
        if not np.all(np.isfinite(coords[valid])):
            raise ValueError("valid flow entries must be finite")
        object.__setattr__(self, "target_coords", coords)
        object.__setattr__(self, "valid", valid)


@dataclass(frozen=True)
class OcclusionMask:
    """True where no source pixel landed."""

    holes: np.ndarray = field(repr=False)

    def __post_init__(self):
        holes = np.asarray(self.holes, dtype=bool)
        if holes.ndim != 2:
            raise ValueError(f"mask must be HxW, got {holes.shape}")
        object.__setattr__(self, "holes", holes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.holes.shape

    def count(self) -> int:
        return int(self.holes.sum())


def _check_dims(intrinsics: CameraIntrinsics, *shapes):
    expected = (intrinsics.height, intrinsics.width)
    for shape in shapes:
        if tuple(shape) != expected:
            raise DimensionMismatch(f"grid {shape} does not match camera {expected}")


def _flow_with_depth(depth: DepthMap, pose: RigidPose, intrinsics: CameraIntrinsics):
    """Target coords, target z-depths, and the per-pixel validity mask."""
    height, width = depth.shape
    if np.array_equal(pose.rotation, np.eye(3)) and not pose.translation.any():
        # the identity transform maps each pixel center to itself exactly;
        # going through unproject/project would round-trip the division
        coords = pixel_centers(width, height)
        valid = depth.valid & (depth.values > MIN_DEPTH)
        z = np.where(valid, depth.values, 0.0)
        return np.where(valid[..., None], coords, 0.0), z, valid
    safe = np.where(depth.valid, depth.values, 1.0)
    coords, z = reproject_grid(safe, pose, intrinsics)
    valid = depth.valid & (z > MIN_DEPTH) & np.all(np.isfinite(coords), axis=-1)
    coords = np.where(valid[..., None], coords, 0.0)
    z = np.where(valid, z, 0.0)
    return coords, z, valid


def compute_flow(depth: DepthMap, pose: RigidPose, intrinsics: CameraIntrinsics) -> FlowField:
    """Continuous target coordinate of every source pixel center.

    Pixels with invalid depth, or whose transformed point falls behind the
    target camera, are marked invalid (their coordinates are zeroed).
    """
    _check_dims(intrinsics, depth.shape)
    coords, _, valid = _flow_with_depth(depth, pose, intrinsics)
    return FlowField(coords, valid)


def _bilinear_scatter_terms(coords: np.ndarray, valid: np.ndarray, width: int, height: int):
    """Flatten valid splats into (target_index, weight, source_slot) arrays.

    source_slot indexes into the row-major list of valid source pixels.
    Contributions are emitted corner-by-corner in a fixed order so that
    accumulation is deterministic.
    """
    p = coords[valid] - 0.5
    i0 = np.floor(p[:, 0]).astype(np.int64)
    j0 = np.floor(p[:, 1]).astype(np.int64)
    fx = p[:, 0] - i0
    fy = p[:, 1] - j0
    slots = np.arange(p.shape[0])

    t_idx, weights, sources = [], [], []
    corners = (
        (i0, j0, (1 - fx) * (1 - fy)),
        (i0 + 1, j0, fx * (1 - fy)),
        (i0, j0 + 1, (1 - fx) * fy),
        (i0 + 1, j0 + 1, fx * fy),
    )
    for ci, cj, w in corners:
        inb = (ci >= 0) & (ci < width) & (cj >= 0) & (cj < height) & (w > 0)
        t_idx.append(cj[inb] * width + ci[inb])
        weights.append(w[inb])
        sources.append(slots[inb])
    return np.concatenate(t_idx), np.concatenate(weights), np.concatenate(sources)


def splat_coverage(depth: DepthMap, pose: RigidPose, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Accumulated bilinear footprint mass per target pixel.

    This is the quantity compared against WEIGHT_EPSILON to decide holes;
    on conflict-free warps with fully interior flow it sums to 1 per pixel.
    """
    _check_dims(intrinsics, depth.shape)
    h, w = depth.shape
    coords, _, valid = _flow_with_depth(depth, pose, intrinsics)
    cover = np.zeros(h * w)
    if valid.any():
        t_idx, weights, _ = _bilinear_scatter_terms(coords, valid, w, h)
        np.add.at(cover, t_idx, weights)
    return cover.reshape(h, w)


def forward_warp(
    source: FeatureGrid,
    depth: DepthMap,
    pose: RigidPose,
    intrinsics: CameraIntrinsics,
    weight_epsilon: float = WEIGHT_EPSILON,
) -> tuple[FeatureGrid, OcclusionMask]:
    """Splat the source grid into the target view.

    Each valid source pixel lands at its flow coordinate with a bilinear
    footprint; out-of-frame contributions are discarded. Depth conflicts
    are resolved by weighting each contribution with exp(-alpha * z) where
    alpha = 10 / median(target depth), i.e. a smooth approximation of
    z-buffering. Target pixels whose accumulated footprint mass stays below
    ``weight_epsilon`` are reported as holes and zero-filled.
    """
    _check_dims(intrinsics, source.shape, depth.shape)
    h, w = depth.shape
    c = source.channels
    coords, z, valid = _flow_with_depth(depth, pose, intrinsics)

    if not valid.any():
        return FeatureGrid(np.zeros((h, w, c))), OcclusionMask(np.ones((h, w), dtype=bool))

    zv = z[valid]
    alpha = 10.0 / np.median(zv)
    # shifting by the minimum cancels in the weighted average and keeps exp in range
    soft = np.exp(-alpha * (zv - zv.min()))
    feats = source.data.reshape(-1, c)[valid.ravel()]

    t_idx, weights, slots = _bilinear_scatter_terms(coords, valid, w, h)
    ws = weights * soft[slots]

    cover = np.zeros(h * w)
    den = np.zeros(h * w)
    num = np.zeros((h * w, c))
    np.add.at(cover, t_idx, weights)
    np.add.at(den, t_idx, ws)
    np.add.at(num, t_idx, ws[:, None] * feats[slots])

    holes = cover < weight_epsilon
    out = np.zeros((h * w, c))
    hit = den > 0
    out[hit] = num[hit] / den[hit, None]
    out[holes] = 0.0
    return FeatureGrid(out.reshape(h, w, c)), OcclusionMask(holes.reshape(h, w))


def _bilinear_gather(data: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample an HxWxC grid at continuous pixel coordinates (clamped)."""
    h, w = data.shape[:2]
    px = np.clip(coords[..., 0] - 0.5, 0.0, w - 1.0)
    py = np.clip(coords[..., 1] - 0.5, 0.0, h - 1.0)
    i0 = np.clip(np.floor(px).astype(np.int64), 0, w - 2) if w > 1 else np.zeros_like(px, np.int64)
    j0 = np.clip(np.floor(py).astype(np.int64), 0, h - 2) if h > 1 else np.zeros_like(py, np.int64)
    i1 = np.minimum(i0 + 1, w - 1)
    j1 = np.minimum(j0 + 1, h - 1)
    fx = (px - i0)[..., None]
    fy = (py - j0)[..., None]
    return (
        data[j0, i0] * (1 - fx) * (1 - fy)
        + data[j0, i1] * fx * (1 - fy)
        + data[j1, i0] * (1 - fx) * fy
        + data[j1, i1] * fx * fy
    )


def inverse_warp(
    source: FeatureGrid,
    depth: DepthMap,
    pose: RigidPose,
    intrinsics: CameraIntrinsics,
    weight_epsilon: float = WEIGHT_EPSILON,
) -> tuple[FeatureGrid, OcclusionMask]:
    """Gather source colors per target pixel via a densified inverse flow.

    The forward flow is splatted into the target grid carrying the source
    pixel-center coordinates; per target pixel, only contributions within a
    small relative band of the nearest depth survive (nearest-depth wins,
    with bilinear sub-pixel averaging among the surviving surface). Gaps up
    to MAX_FILL_DISTANCE pixels from covered ones are filled from their
    nearest covered neighbor, then the source is sampled bilinearly at the
    reconstructed coordinates. Remaining pixels are holes, zero-filled.
    """
    _check_dims(intrinsics, source.shape, depth.shape)
    h, w = depth.shape
    c = source.channels
    coords, z, valid = _flow_with_depth(depth, pose, intrinsics)

    if not valid.any():
        return FeatureGrid(np.zeros((h, w, c))), OcclusionMask(np.ones((h, w), dtype=bool))

    src_coords = pixel_centers(w, h)[valid]
    zv = z[valid]
    t_idx, weights, slots = _bilinear_scatter_terms(coords, valid, w, h)

    zbuf = np.full(h * w, np.inf)
    np.minimum.at(zbuf, t_idx, zv[slots])
    keep = zv[slots] <= zbuf[t_idx] * (1.0 + DEPTH_BAND)
    t_idx, weights, slots = t_idx[keep], weights[keep], slots[keep]

    den = np.zeros(h * w)
    num = np.zeros((h * w, 2))
    np.add.at(den, t_idx, weights)
    np.add.at(num, t_idx, weights[:, None] * src_coords[slots])

    covered = (den >= weight_epsilon).reshape(h, w)
    inv_flow = np.zeros((h * w, 2))
    hit = den > 0
    inv_flow[hit] = num[hit] / den[hit, None]
    inv_flow = inv_flow.reshape(h, w, 2)

    dist, (near_j, near_i) = ndimage.distance_transform_edt(~covered, return_indices=True)
    fill = ~covered & (dist <= MAX_FILL_DISTANCE)
    inv_flow[fill] = inv_flow[near_j[fill], near_i[fill]]
    reached = covered | fill

    out = _bilinear_gather(source.data, inv_flow)
    out[~reached] = 0.0
    return FeatureGrid(out), OcclusionMask(~reached)


def filter_occlusion_mask(mask: OcclusionMask, min_size: int = 8) -> OcclusionMask:
    """Expand small hole components to at least ``min_size`` per side.

    Connected components (4-connectivity) whose bounding box is smaller
    than ``min_size`` in either dimension are replaced by a filled box of
    at least ``min_size`` per side, centered on the original box and
    shifted to stay inside the image (capped at the image size). Larger
    components are left untouched. The result is a superset of the input
    and the filter is idempotent.
    """
    if min_size < 1:
        raise ValueError(f"min_size must be >= 1, got {min_size}")
    holes = mask.holes
    h, w = holes.shape
    out = holes.copy()
    labels, count = ndimage.label(holes)
    if count == 0:
        return OcclusionMask(out)
    target_h = min(min_size, h)
    target_w = min(min_size, w)
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        box_h = sl[0].stop - sl[0].start
        box_w = sl[1].stop - sl[1].start
        new_h = max(box_h, target_h)
        new_w = max(box_w, target_w)
        if new_h == box_h and new_w == box_w:
            continue
        y0 = (sl[0].start + sl[0].stop - new_h) // 2
        x0 = (sl[1].start + sl[1].stop - new_w) // 2
        y0 = min(max(y0, 0), h - new_h)
        x0 = min(max(x0, 0), w - new_w)
        out[y0 : y0 + new_h, x0 : x0 + new_w] = True
    return OcclusionMask(out)


def downscale_mask(mask: OcclusionMask, factor: int) -> OcclusionMask:
    """Reduce a mask by ``factor``; a low-res cell is a hole if any of its
    constituent pixels is one."""
    if factor < 1:
        raise DegenerateSize(f"factor must be >= 1, got {factor}")
    h, w = mask.shape
    if h % factor or w % factor:
        raise DimensionMismatch(f"mask {h}x{w} not divisible by {factor}")
    blocks = mask.holes.reshape(h // factor, factor, w // factor, factor)
    return OcclusionMask(blocks.any(axis=(1, 3)))
