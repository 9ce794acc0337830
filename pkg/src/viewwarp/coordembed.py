"""Coordinate conditioning signals: canonical pixel coordinate maps, their
sinusoidal (Fourier) encodings, the depth-warped variants that tell a
generator where source content lands in the target view, and the
alternative conditioning channels used for comparisons (warped depth,
warped image, per-pixel camera rays).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSize, MissingInput
from .geometry import CameraIntrinsics, RigidPose, plucker_rays
from .warpcore import DepthMap, FeatureGrid, OcclusionMask, forward_warp

DEFAULT_NUM_BANDS = 6


@dataclass(frozen=True)
class CoordinateMap:
    """H x W x 2 grid of (x, y) values spanning [-1, 1] per axis."""

    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 3 or coords.shape[2] != 2:
            raise ValueError(f"coordinate map must be HxWx2, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinate map contains NaN or Inf")
        if coords.min() < -1.0 or coords.max() > 1.0:
            raise ValueError("coordinate values must lie in [-1, 1]")
        object.__setattr__(self, "coords", coords)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coords.shape[:2]


@dataclass(frozen=True)
class FourierEmbedding:
    """Sinusoidal encoding of a coordinate map.

    Channels are grouped band-major: for band k with frequency f_k the
    four channels are [sin(f_k x), cos(f_k x), sin(f_k y), cos(f_k y)].
    Every entry lies in [-1, 1].
    """

    data: np.ndarray = field(repr=False)
    frequencies: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        freqs = np.asarray(self.frequencies, dtype=np.float64)
        if data.ndim != 3 or freqs.ndim != 1 or data.shape[2] != 4 * freqs.size:
            raise ValueError(
                f"embedding {data.shape} inconsistent with {freqs.size} frequency bands"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("embedding contains NaN or Inf")
        if data.min() < -1.0 - 1e-12 or data.max() > 1.0 + 1e-12:
            raise ValueError("embedding entries must lie in [-1, 1]")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "frequencies", freqs)

    @property
    def num_bands(self) -> int:
        return int(self.frequencies.size)

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def as_grid(self) -> FeatureGrid:
        return FeatureGrid(self.data)


def canonical_coords(width: int, height: int) -> CoordinateMap:
    """Per-pixel (x, y) values spanning [-1, 1] inclusive on each axis.

    Pixel (0, 0) maps to (-1, -1) and (width-1, height-1) to (1, 1);
    values vary linearly in between. Requires at least 2 pixels per axis.
    """
    if width < 2 or height < 2:
        raise DegenerateSize(f"grid must be at least 2x2, got {width}x{height}")
    xs = np.linspace(-1.0, 1.0, width)
    ys = np.linspace(-1.0, 1.0, height)
    gx, gy = np.meshgrid(xs, ys)
    return CoordinateMap(np.stack([gx, gy], axis=-1))


def fourier_encode(coords: CoordinateMap, num_bands: int = DEFAULT_NUM_BANDS) -> FourierEmbedding:
    """Sinusoidal encoding with octave-spaced frequencies pi * 2^k.

    Each axis value x contributes sin(2^k pi x) and cos(2^k pi x) for
    k = 0 .. num_bands-1, giving 4 * num_bands channels total.
    """
    if num_bands < 1:
        raise ValueError(f"num_bands must be >= 1, got {num_bands}")
    freqs = np.pi * (2.0 ** np.arange(num_bands))
    xy = coords.coords
    h, w = xy.shape[:2]
    out = np.empty((h, w, 4 * num_bands))
    for k, f in enumerate(freqs):
        out[:, :, 4 * k + 0] = np.sin(f * xy[:, :, 0])
        out[:, :, 4 * k + 1] = np.cos(f * xy[:, :, 0])
        out[:, :, 4 * k + 2] = np.sin(f * xy[:, :, 1])
        out[:, :, 4 * k + 3] = np.cos(f * xy[:, :, 1])
    np.clip(out, -1.0, 1.0, out=out)
    return FourierEmbedding(out, freqs)


def warped_coord_embedding(
    depth: DepthMap,
    pose: RigidPose,
    intrinsics: CameraIntrinsics,
    num_bands: int = DEFAULT_NUM_BANDS,
) -> tuple[FourierEmbedding, OcclusionMask]:
    """Source-view Fourier coordinates splatted into the target view.

    The canonical coordinate map of the source view is encoded, then
    forward-warped with the source depth; target pixels nothing lands on
    are holes and are zero-filled. The embedding tells a target-view
    consumer which source location each visible pixel came from.
    """
    h, w = depth.shape
    embedding = fourier_encode(canonical_coords(w, h), num_bands)
    warped, mask = forward_warp(FeatureGrid(embedding.data), depth, pose, intrinsics)
    return FourierEmbedding(warped.data, embedding.frequencies), mask


_ABLATION_KINDS = ("warped_coords", "warped_depth", "warped_image", "plucker")


def ablation_condition(
    kind: str,
    *,
    depth: DepthMap | None = None,
    pose: RigidPose | None = None,
    intrinsics: CameraIntrinsics | None = None,
    image: FeatureGrid | None = None,
    num_bands: int = DEFAULT_NUM_BANDS,
) -> FeatureGrid:
    """Build one of the alternative conditioning signals.

    ``warped_coords``   Fourier coordinate embedding, forward-warped (4 * num_bands ch).
    ``warped_depth``    source depth values, forward-warped (1 ch).
    ``warped_image``    source image, forward-warped (image channels).
    ``plucker``         per-pixel camera rays as (direction, moment) pairs (6 ch).

    Raises MissingInput when a required input for the kind is absent.
    """
    if kind not in _ABLATION_KINDS:
        raise ValueError(f"unknown condition kind {kind!r}; expected one of {_ABLATION_KINDS}")

    def need(**inputs):
        for name, value in inputs.items():
            if value is None:
                raise MissingInput(f"condition {kind!r} requires {name}")

    if kind == "plucker":
        need(intrinsics=intrinsics, pose=pose)
        return FeatureGrid(plucker_rays(intrinsics, pose).grid)

    need(depth=depth, pose=pose, intrinsics=intrinsics)
    if kind == "warped_coords":
        embedding, _ = warped_coord_embedding(depth, pose, intrinsics, num_bands)
        return embedding.as_grid()
    if kind == "warped_depth":
        plane = np.where(depth.valid, depth.values, 0.0)[:, :, None]
        warped, _ = forward_warp(FeatureGrid(plane), depth, pose, intrinsics)
        return warped
    need(image=image)
    warped, _ = forward_warp(image, depth, pose, intrinsics)
    return warped
