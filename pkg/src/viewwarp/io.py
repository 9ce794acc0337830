"""File formats for depth maps, images, masks, matches, and cameras.

Depth ("DPT1"): little-endian binary with a 16-byte header
  {magic "DPT1", width u32, height u32, flags u32}
followed by row-major float32 planes. flags bit 0 marks an appended
confidence plane; flags bit 1 marks the multi-plane variant, whose header
is extended by a u32 channel count and which stores C planes (used for
embedding grids). Invalid depth pixels are stored as 0; on load, validity
is inferred as finite-and-positive.

Matches ("MCH1"): magic, u32 record count, then float32 records
  (u_i, v_i, u_j, v_j, weight).

Cameras: JSON {fx, fy, cx, cy, width, height, pose: {rotation: 9 row-major
values, translation: 3 values}}.

Images are 8-bit PNG (values mapped to [0, 1] floats in memory); masks are
8-bit PNG with 255 = hole; depth can also be read/written as 16-bit PNG
with a value scale.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import CameraIntrinsics, RigidPose
from .warpcore import DepthMap, FeatureGrid, OcclusionMask

DEPTH_MAGIC = b"DPT1"
MATCH_MAGIC = b"MCH1"
FLAG_CONFIDENCE = 1
FLAG_MULTIPLANE = 2


def save_depth(path, depth: DepthMap) -> None:
    """Write a DPT1 depth file; invalid pixels are encoded as 0."""
    path = Path(path)
    h, w = depth.shape
    flags = FLAG_CONFIDENCE if depth.confidence is not None else 0
    values = np.where(depth.valid, depth.values, 0.0).astype("<f4")
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC + struct.pack("<III", w, h, flags))
        f.write(values.tobytes())
        if depth.confidence is not None:
            f.write(depth.confidence.astype("<f4").tobytes())


def load_depth(path) -> DepthMap:
    """Read a DPT1 depth file; finite positive values are valid."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != DEPTH_MAGIC:
        raise ValueError(f"{path}: not a DPT1 depth file")
    w, h, flags = struct.unpack("<III", raw[4:16])
    if flags & FLAG_MULTIPLANE:
        raise ValueError(f"{path}: multi-plane grid, use load_planes")
    plane = 4 * w * h
    expected = 16 + plane * (2 if flags & FLAG_CONFIDENCE else 1)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, "<f4", count=w * h, offset=16).reshape(h, w).astype(np.float64)
    confidence = None
    if flags & FLAG_CONFIDENCE:
        confidence = (
            np.frombuffer(raw, "<f4", count=w * h, offset=16 + plane)
            .reshape(h, w)
            .astype(np.float64)
        )
    return DepthMap.from_values(values, confidence)


def save_planes(path, data: np.ndarray) -> None:
    """Write an HxWxC float grid as the multi-plane DPT1 variant."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    h, w, c = data.shape
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC + struct.pack("<IIII", w, h, FLAG_MULTIPLANE, c))
        f.write(np.ascontiguousarray(data.transpose(2, 0, 1)).astype("<f4").tobytes())


def load_planes(path) -> np.ndarray:
    """Read the multi-plane DPT1 variant as an HxWxC float array."""
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != DEPTH_MAGIC:
        raise ValueError(f"{path}: not a DPT1 file")
    w, h, flags, c = struct.unpack("<IIII", raw[4:20])
    if not flags & FLAG_MULTIPLANE:
        raise ValueError(f"{path}: single-plane depth, use load_depth")
    if len(raw) != 20 + 4 * w * h * c:
        raise ValueError(f"{path}: truncated multi-plane file")
    planes = np.frombuffer(raw, "<f4", offset=20).reshape(c, h, w)
    return planes.transpose(1, 2, 0).astype(np.float64)


def save_depth_png(path, depth: DepthMap, scale: float = 1000.0) -> None:
    """16-bit PNG depth: stored value = depth * scale; 0 marks invalid."""
    encoded = np.where(depth.valid, np.round(depth.values * scale), 0.0)
    if encoded.max(initial=0.0) > 65535:
        raise ValueError(f"depth * {scale} exceeds 16-bit range")
    Image.fromarray(encoded.astype(np.uint16)).save(path)


def load_depth_png(path, scale: float = 1000.0) -> DepthMap:
    """Read 16-bit (or 8-bit) PNG depth; value / scale, 0 = invalid."""
    arr = np.asarray(Image.open(path)).astype(np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{path}: depth PNG must be single-channel")
    return DepthMap.from_values(arr / scale)


def save_image(path, grid: FeatureGrid) -> None:
    """8-bit PNG from a [0, 1] float grid (1 or 3 channels)."""
    data = np.clip(grid.data, 0.0, 1.0)
    arr = np.round(data * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    elif arr.shape[2] != 3:
        raise ValueError(f"image grids need 1 or 3 channels, got {arr.shape[2]}")
    Image.fromarray(arr).save(path)


def load_image(path) -> FeatureGrid:
    """PNG to a [0, 1] float grid; grayscale becomes 1 channel."""
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    arr = np.asarray(img).astype(np.float64) / 255.0
    return FeatureGrid(arr if arr.ndim == 3 else arr[:, :, None])


def save_mask(path, mask: OcclusionMask) -> None:
    """8-bit PNG, 255 = hole."""
    Image.fromarray(np.where(mask.holes, 255, 0).astype(np.uint8)).save(path)


def load_mask(path) -> OcclusionMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return OcclusionMask(arr >= 128)


def camera_to_dict(intrinsics: CameraIntrinsics, pose: RigidPose | None = None) -> dict:
    pose = pose or RigidPose.identity()
    return {
        "fx": intrinsics.fx,
        "fy": intrinsics.fy,
        "cx": intrinsics.cx,
        "cy": intrinsics.cy,
        "width": intrinsics.width,
        "height": intrinsics.height,
        "pose": {
            "rotation": [float(x) for x in pose.rotation.ravel()],
            "translation": [float(x) for x in pose.translation],
        },
    }


def camera_from_dict(data: dict) -> tuple[CameraIntrinsics, RigidPose]:
    intrinsics = CameraIntrinsics(
        fx=float(data["fx"]),
        fy=float(data["fy"]),
        cx=float(data["cx"]),
        cy=float(data["cy"]),
        width=int(data["width"]),
        height=int(data["height"]),
    )
    pose_data = data.get("pose")
    if pose_data is None:
        pose = RigidPose.identity()
    else:
        pose = RigidPose(
            np.array(pose_data["rotation"], dtype=np.float64).reshape(3, 3),
            np.array(pose_data["translation"], dtype=np.float64),
        )
    return intrinsics, pose


def save_camera(path, intrinsics: CameraIntrinsics, pose: RigidPose | None = None) -> None:
    """Camera JSON: intrinsics plus a (row-major rotation, translation) pose."""
    Path(path).write_text(json.dumps(camera_to_dict(intrinsics, pose), indent=2) + "\n")


def load_camera(path) -> tuple[CameraIntrinsics, RigidPose]:
    return camera_from_dict(json.loads(Path(path).read_text()))


def save_matches(path, matches: np.ndarray) -> None:
    """Write MCH1 match records; a missing weight column defaults to 1."""
    matches = np.asarray(matches, dtype=np.float64)
    if matches.ndim != 2 or matches.shape[1] not in (4, 5):
        raise ValueError(f"matches must be (N, 4) or (N, 5), got {matches.shape}")
    if matches.shape[1] == 4:
        matches = np.concatenate([matches, np.ones((matches.shape[0], 1))], axis=1)
    with open(path, "wb") as f:
        f.write(MATCH_MAGIC + struct.pack("<I", matches.shape[0]))
        f.write(matches.astype("<f4").tobytes())


def load_matches(path) -> np.ndarray:
    """Read MCH1 records as an (N, 5) float array."""
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MATCH_MAGIC:
        raise ValueError(f"{path}: not an MCH1 match file")
    (count,) = struct.unpack("<I", raw[4:8])
    if len(raw) != 8 + 20 * count:
        raise ValueError(f"{path}: expected {count} records, file size disagrees")
    return np.frombuffer(raw, "<f4", offset=8).reshape(count, 5).astype(np.float64)
