"""Dataset preparation: frame-pair sampling, confidence-based exclusion,
per-pair pose recovery, and manifest emission.

Expected layout under the dataset root:

    root/<sequence>/frames/%06d.png     8-bit frames
    root/<sequence>/depth/%06d.dpt      DPT1 depth (+ confidence plane)
    root/<sequence>/matches/%06d_%06d.mch   MCH1 matches for sampled pairs
    root/<sequence>/camera.json         shared intrinsics for the sequence

The pipeline writes one pose JSON (plus an inlier sidecar) per surviving
pair under root/<sequence>/poses/ and emits a JSON-Lines manifest: one
record per line sorted by (sequence_id, frame_i, frame_j), then a summary
line with the dataset tag and counts. Every record path is root-relative
with POSIX separators, so manifests are portable.

Determinism: each sequence draws from its own generator seeded by (seed,
crc32(sequence_id)) and each pair's pose fit is seeded the same way, so
results do not depend on thread scheduling; records are sorted before
emission. Reruns reuse pose files already on disk, which makes the
pipeline resumable and idempotent.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path, PurePosixPath
from zlib import crc32

import numpy as np

from . import io as vio
from .errors import (
    MalformedLayout,
    MissingConfidence,
    SequenceTooShort,
    ViewWarpError,
)
from .geometry import CameraIntrinsics, RigidPose, pixel_centers, project
from .posealign import depth_to_correspondences, pnp_ransac
from .warpcore import DepthMap

log = logging.getLogger(__name__)

DEFAULT_MIN_INTERVAL = 30
DEFAULT_MAX_INTERVAL = 120
DEFAULT_STRIDE = 10
DEFAULT_CONF_THRESHOLD = 0.5


@dataclass(frozen=True)
class FramePairRecord:
    """One training pair: paths are dataset-root-relative POSIX strings."""

    sequence_id: str
    frame_i: int
    frame_j: int
    interval: int
    image_i: str
    image_j: str
    depth: str
    camera: str
    mean_confidence: float | None

    def __post_init__(self):
        if self.frame_i >= self.frame_j:
            raise ValueError(f"frame_i {self.frame_i} must precede frame_j {self.frame_j}")

    def to_json(self) -> str:
        data = asdict(self)
        return json.dumps(data, separators=(",", ":"))


@dataclass(frozen=True)
class Manifest:
    records: tuple[FramePairRecord, ...]
    dataset_tag: str
    stats: dict

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for build_manifest; also the schema of the CLI config file."""

    min_interval: int = DEFAULT_MIN_INTERVAL
    max_interval: int = DEFAULT_MAX_INTERVAL
    stride: int = DEFAULT_STRIDE
    partners_per_anchor: int = 1
    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    seed: int = 0
    threads: int = 1
    inlier_threshold: float = 2.0
    ransac_confidence: float = 0.999
    dataset_tag: str = "dataset"
    out: str | None = None


def sequence_seed(seed: int, sequence_id: str) -> np.random.SeedSequence:
    """Per-sequence seed independent of processing order."""
    return np.random.SeedSequence([seed, crc32(sequence_id.encode("utf-8"))])


def pair_seed(seed: int, sequence_id: str, frame_i: int, frame_j: int) -> int:
    """Per-pair integer seed, stable across threads and reruns."""
    ss = np.random.SeedSequence(
        [seed, crc32(sequence_id.encode("utf-8")), frame_i, frame_j]
    )
    return int(ss.generate_state(1)[0])


def sample_pairs(
    sequence,
    min_interval: int = DEFAULT_MIN_INTERVAL,
    max_interval: int = DEFAULT_MAX_INTERVAL,
    stride: int = DEFAULT_STRIDE,
    seed: int | np.random.SeedSequence = 0,
    partners_per_anchor: int = 1,
) -> list[tuple[int, int, int]]:
    """Pick (frame_i, frame_j, interval) tuples from a frame-id list.

    Anchors step through the list by ``stride`` positions; each anchor
    draws ``partners_per_anchor`` partners at seeded-uniform position
    offsets in [min_interval, max_interval], discarding draws past the end
    of the list. The interval is the position offset.
    """
    ids = list(sequence)
    if not 0 < min_interval <= max_interval:
        raise ValueError(f"bad interval bounds [{min_interval}, {max_interval}]")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if len(ids) <= min_interval:
        raise SequenceTooShort(
            f"sequence of {len(ids)} frames cannot host a {min_interval}-frame interval"
        )
    rng = np.random.default_rng(seed)
    pairs = []
    for anchor in range(0, len(ids), stride):
        for _ in range(partners_per_anchor):
            interval = int(rng.integers(min_interval, max_interval + 1))
            partner = anchor + interval
            if partner < len(ids):
                pairs.append((ids[anchor], ids[partner], interval))
    return pairs


def confidence_filter(records, threshold: float):
    """Partition records into (kept, excluded) by mean depth confidence."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    kept, excluded = [], []
    for record in records:
        if record.mean_confidence is None:
            raise MissingConfidence(
                f"{record.sequence_id} pair ({record.frame_i}, {record.frame_j}) "
                "has no confidence"
            )
        (kept if record.mean_confidence >= threshold else excluded).append(record)
    return kept, excluded


def _frame_ids(frames_dir: Path) -> list[int]:
    ids = []
    for p in sorted(frames_dir.glob("*.png")):
        try:
            ids.append(int(p.stem))
        except ValueError:
            raise MalformedLayout(f"non-numeric frame name {p.name} in {frames_dir}")
    return sorted(ids)


def _relpath(path: Path, root: Path) -> str:
    return str(PurePosixPath(path.relative_to(root)))


def _process_sequence(root: Path, seq_dir: Path, config: PipelineConfig):
    """Sample, fit, and describe one sequence's pairs.

    Returns (records, sampled_count, error_counts). Per-pair failures are
    logged and counted, never raised.
    """
    seq = seq_dir.name
    intrinsics, _ = vio.load_camera(seq_dir / "camera.json")
    ids = _frame_ids(seq_dir / "frames")
    try:
        pairs = sample_pairs(
            ids,
            config.min_interval,
            config.max_interval,
            config.stride,
            seed=sequence_seed(config.seed, seq),
            partners_per_anchor=config.partners_per_anchor,
        )
    except SequenceTooShort as exc:
        log.warning("%s: %s", seq, exc)
        return [], 0, {}

    records = []
    errors: dict[str, int] = {}
    poses_dir = seq_dir / "poses"
    for frame_i, frame_j, interval in pairs:
        try:
            record = _process_pair(
                root, seq_dir, intrinsics, frame_i, frame_j, interval, poses_dir, config
            )
            records.append(record)
        except (ViewWarpError, ValueError, OSError) as exc:
            kind = type(exc).__name__
            errors[kind] = errors.get(kind, 0) + 1
            log.warning("%s pair (%d, %d) skipped: %s", seq, frame_i, frame_j, exc)
    return records, len(pairs), errors


def _process_pair(root, seq_dir, intrinsics, frame_i, frame_j, interval, poses_dir, config):
    seq = seq_dir.name
    image_i = seq_dir / "frames" / f"{frame_i:06d}.png"
    image_j = seq_dir / "frames" / f"{frame_j:06d}.png"
    depth_path = seq_dir / "depth" / f"{frame_i:06d}.dpt"
    for required in (image_i, image_j, depth_path):
        if not required.exists():
            raise FileNotFoundError(f"missing {required}")

    depth = vio.load_depth(depth_path)
    if depth.confidence is not None and depth.valid.any():
        mean_confidence = float(depth.confidence[depth.valid].mean())
    else:
        # sequences shipped without a confidence plane are taken at face value
        mean_confidence = 1.0

    pose_path = poses_dir / f"{frame_i:06d}_{frame_j:06d}.json"
    if not pose_path.exists():
        matches = vio.load_matches(seq_dir / "matches" / f"{frame_i:06d}_{frame_j:06d}.mch")
        correspondences = depth_to_correspondences(depth, matches, intrinsics)
        estimate = pnp_ransac(
            correspondences,
            intrinsics,
            inlier_threshold=config.inlier_threshold,
            confidence=config.ransac_confidence,
            seed=pair_seed(config.seed, seq, frame_i, frame_j),
        )
        poses_dir.mkdir(exist_ok=True)
        vio.save_camera(pose_path, intrinsics, estimate.pose)
        sidecar = {
            "inliers": [int(k) for k in estimate.inliers],
            "reprojection_rmse": estimate.reprojection_rmse,
        }
        (poses_dir / f"{frame_i:06d}_{frame_j:06d}.inliers.json").write_text(
            json.dumps(sidecar, separators=(",", ":")) + "\n"
        )

    return FramePairRecord(
        sequence_id=seq,
        frame_i=frame_i,
        frame_j=frame_j,
        interval=interval,
        image_i=_relpath(image_i, root),
        image_j=_relpath(image_j, root),
        depth=_relpath(depth_path, root),
        camera=_relpath(pose_path, root),
        mean_confidence=mean_confidence,
    )


def build_manifest(root, config: PipelineConfig = PipelineConfig()) -> Manifest:
    """Walk the dataset root, fit poses for sampled pairs, write the manifest.

    Per-pair failures (missing or corrupt files, degenerate geometry, too
    few inliers) are logged, counted in the stats, and skipped; a broken
    directory layout aborts with MalformedLayout. Rerunning over unchanged
    inputs reuses existing pose files and reproduces the manifest
    byte-for-byte regardless of the thread count.
    """
    root = Path(root)
    if not root.is_dir():
        raise MalformedLayout(f"dataset root {root} is not a directory")
    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    for seq_dir in seq_dirs:
        for required in ("frames", "depth", "camera.json"):
            if not (seq_dir / required).exists():
                raise MalformedLayout(f"{seq_dir} lacks {required}")

    if config.threads > 1 and len(seq_dirs) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda d: _process_sequence(root, d, config), seq_dirs))
    else:
        results = [_process_sequence(root, d, config) for d in seq_dirs]

    records = [r for result in results for r in result[0]]
    sampled = sum(result[1] for result in results)
    error_counts: dict[str, int] = {}
    for result in results:
        for kind, count in result[2].items():
            error_counts[kind] = error_counts.get(kind, 0) + count

    records.sort(key=lambda r: (r.sequence_id, r.frame_i, r.frame_j))
    deduped = []
    seen = set()
    for record in records:
        key = (record.sequence_id, record.frame_i, record.frame_j)
        if key not in seen:
            seen.add(key)
            deduped.append(record)

    kept, excluded = confidence_filter(deduped, config.conf_threshold)
    stats = {
        "sampled": sampled,
        "kept": len(kept),
        "excluded_confidence": len(excluded),
        "excluded_error": sum(error_counts.values()),
        "error_kinds": dict(sorted(error_counts.items())),
    }
    manifest = Manifest(tuple(kept), config.dataset_tag, stats)
    if config.out:
        write_manifest(manifest, config.out)
    return manifest


def manifest_text(manifest: Manifest) -> str:
    """JSON Lines serialization: one record per line, then a summary line."""
    lines = [record.to_json() for record in manifest.records]
    summary = {"dataset_tag": manifest.dataset_tag, "stats": manifest.stats}
    lines.append(json.dumps(summary, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def write_manifest(manifest: Manifest, path) -> None:
    """Write the JSON Lines serialization atomically (temp file + rename)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(manifest_text(manifest))
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_manifest(path) -> Manifest:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty manifest")
    records = [FramePairRecord(**json.loads(line)) for line in lines[:-1]]
    summary = json.loads(lines[-1])
    if "dataset_tag" not in summary or "stats" not in summary:
        raise ValueError(f"{path}: final line is not a summary record")
    return Manifest(tuple(records), summary["dataset_tag"], summary["stats"])


def validate_manifest(
    manifest: Manifest,
    min_interval: int = DEFAULT_MIN_INTERVAL,
    max_interval: int = DEFAULT_MAX_INTERVAL,
    root=None,
) -> None:
    """Check manifest invariants; raises ValueError on the first violation.

    Verifies interval bounds, frame ordering, sort order, uniqueness, and
    stats consistency; with ``root`` given, also that referenced files
    exist.
    """
    seen = set()
    previous = None
    for record in manifest.records:
        if not min_interval <= record.interval <= max_interval:
            raise ValueError(
                f"interval {record.interval} outside [{min_interval}, {max_interval}]"
            )
        key = (record.sequence_id, record.frame_i, record.frame_j)
        if key in seen:
            raise ValueError(f"duplicate pair {key}")
        seen.add(key)
        if previous is not None and key < previous:
            raise ValueError(f"records out of order at {key}")
        previous = key
        if root is not None:
            for rel in (record.image_i, record.image_j, record.depth, record.camera):
                if not (Path(root) / rel).exists():
                    raise ValueError(f"missing referenced file {rel}")
    stats = manifest.stats
    if stats.get("kept") != len(manifest.records):
        raise ValueError("stats.kept disagrees with record count")


# ---------------------------------------------------------------------------
# synthetic dataset fixture

GOLDEN_TAG = "synthetic-fixture"
GOLDEN_SEED = 7


def golden_config(threads: int = 1, out=None) -> PipelineConfig:
    """The configuration that pairs with ``make_fixture`` defaults.

    Building a default fixture under this configuration reproduces the
    golden manifest bundled with the package, byte for byte.
    """
    return PipelineConfig(seed=GOLDEN_SEED, dataset_tag=GOLDEN_TAG,
                          threads=threads, out=out)


def make_fixture(
    root,
    sequences: int = 2,
    frames: int = 140,
    size: tuple[int, int] = (32, 24),
    seed: int = 7,
    matches_per_pair: int = 45,
    outliers_per_pair: int = 8,
    config: PipelineConfig | None = None,
) -> Path:
    """Write a deterministic synthetic dataset tree for pipeline tests.

    Each sequence is a two-plane scene observed by a slowly translating,
    slightly rotating camera. Match files are generated from the known
    geometry (with mild noise plus gross outliers) for exactly the pairs
    that ``build_manifest`` will sample under ``config`` — reruns with the
    same arguments produce identical bytes. One block of frames in every
    second sequence carries low depth confidence so the exclusion path is
    exercised.
    """
    from . import synthoracle

    root = Path(root)
    width, height = size
    cfg = config or PipelineConfig(seed=seed, dataset_tag=GOLDEN_TAG)
    intrinsics = CameraIntrinsics(
        fx=1.25 * width, fy=1.25 * width, cx=width / 2, cy=height / 2,
        width=width, height=height,
    )

    for s in range(sequences):
        seq = f"seq{s:02d}"
        seq_dir = root / seq
        (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
        (seq_dir / "depth").mkdir(exist_ok=True)
        (seq_dir / "matches").mkdir(exist_ok=True)
        vio.save_camera(seq_dir / "camera.json", intrinsics)

        base = synthoracle.two_plane_scene(
            intrinsics,
            z_near=2.2 + 0.2 * s,
            z_far=6.0 + 0.5 * s,
            baseline=0.0,
            square_size_px=0.45 * width,
            wavelength_px=1.5 * width,
            seed=seed + 10 * s,
        )
        cameras = []
        for t in range(frames):
            rot = np.array([0.0, 1.5e-4 * t, 5e-5 * t])
            trans = np.array([-3e-3 * t, 1e-3 * np.sin(t / 25.0), 0.0])
            cameras.append((intrinsics, RigidPose.from_axis_angle(rot, trans)))
        scene = synthoracle.SyntheticScene(base.primitives, cameras)

        conf_rng = np.random.default_rng(sequence_seed(seed, seq))
        depths = {}
        for t in range(frames):
            image, depth = synthoracle.render(scene, t)
            vio.save_image(seq_dir / "frames" / f"{t:06d}.png", image)
            base_conf = 0.82 + 0.1 * np.sin(
                pixel_centers(width, height).sum(axis=-1) / 7.0 + conf_rng.uniform(0, 6.0)
            )
            if s % 2 == 1 and 60 <= t < 90:
                base_conf = np.full((height, width), 0.3)
            depth = DepthMap(depth.values, depth.valid, np.clip(base_conf, 0.0, 1.0))
            vio.save_depth(seq_dir / "depth" / f"{t:06d}.dpt", depth)
            depths[t] = depth

        pairs = sample_pairs(
            list(range(frames)),
            cfg.min_interval,
            cfg.max_interval,
            cfg.stride,
            seed=sequence_seed(cfg.seed, seq),
            partners_per_anchor=cfg.partners_per_anchor,
        )
        for frame_i, frame_j, _ in pairs:
            rng = np.random.default_rng(pair_seed(seed, seq, frame_i, frame_j))
            rel = scene.relative_pose(frame_i, frame_j)
            depth_i = depths[frame_i]
            rows = []
            while len(rows) < matches_per_pair:
                col = int(rng.integers(0, width))
                line = int(rng.integers(0, height))
                if not depth_i.valid[line, col]:
                    continue
                u_i, v_i = col + 0.5, line + 0.5
                d = depth_i.values[line, col]
                point = np.array(
                    [(u_i - intrinsics.cx) / intrinsics.fx * d,
                     (v_i - intrinsics.cy) / intrinsics.fy * d, d]
                )
                pix, z = project(rel.apply(point), intrinsics)
                if z <= 0 or not (0 <= pix[0] < width and 0 <= pix[1] < height):
                    continue
                noise = rng.normal(0.0, 0.05, size=2)
                rows.append(
                    [u_i, v_i, pix[0] + noise[0], pix[1] + noise[1], rng.uniform(0.6, 1.0)]
                )
            rows = np.array(rows)
            outlier_idx = rng.choice(matches_per_pair, size=outliers_per_pair, replace=False)
            for k in outlier_idx:
                angle = rng.uniform(0, 2 * np.pi)
                radius = rng.uniform(5.0, 12.0)
                rows[k, 2] += radius * np.cos(angle)
                rows[k, 3] += radius * np.sin(angle)
            vio.save_matches(seq_dir / "matches" / f"{frame_i:06d}_{frame_j:06d}.mch", rows)
    return root
