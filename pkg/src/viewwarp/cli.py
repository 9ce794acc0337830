"""Command-line interface.

Exit codes: 0 on success, 2 for usage errors (bad flags, malformed
config), 1 for runtime failures (unreadable files, degenerate inputs).
Diagnostics go to stderr; data products go to the paths given by
``--out``-style flags, or to stdout when the path is ``-``.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import datapipe, io, selfcheck, synthoracle
from .attention import attention_heatmaps, augmented_attention
from .colormap import apply_colormap
from .coordembed import canonical_coords, fourier_encode, warped_coord_embedding
from .errors import ViewWarpError
from .geometry import CameraIntrinsics, RigidPose
from .posealign import depth_to_correspondences, pnp_ransac
from .warpcore import (
    DepthMap,
    FeatureGrid,
    filter_occlusion_mask,
    forward_warp,
    inverse_warp,
)

FORMATS_HELP = """\
file formats:
  images    8-bit PNG, grayscale or RGB; values map linearly to [0, 1].
  masks     8-bit PNG; 255 marks a hole/occluded pixel, 0 marks covered.
  depth     binary .dpt: magic "DPT1", then width/height/flags as little-
            endian uint32, then row-major float32 planes. Flag bit 0 adds a
            confidence plane in [0, 1]; flag bit 1 marks a multi-channel
            plane stack and inserts a uint32 channel count. Depth values
            are positive metric z; 0 marks invalid pixels. 16-bit PNG depth
            (value = depth * scale, 0 invalid) is used by `prepare` trees.
  matches   binary .mch: magic "MCH1", uint32 count, then count records of
            five little-endian float32: u_i, v_i, u_j, v_j, weight.
  camera    JSON with fx, fy, cx, cy, width, height and a pose object
            holding "rotation" (9 row-major entries) and "translation"
            (3 entries), mapping source-frame points into the target frame.
  manifest  JSON-lines; one frame-pair record per line plus a final summary
            line with sampling statistics.
  config    JSON object whose keys mirror a subcommand's long flag names
            with hyphens replaced by underscores; flags given on the
            command line take precedence over config values.
"""


class UsageError(Exception):
    """Invalid arguments discovered after parsing."""


def _add_config_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--config",
        help="JSON file of defaults for this subcommand (same keys as flags)",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="viewwarp",
        description="Depth-based view warping, occlusion masks, warped "
        "coordinate embeddings, augmented attention, and pose alignment.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, help_text: str, **kwargs) -> argparse.ArgumentParser:
        p = subs.add_parser(
            name,
            help=help_text,
            description=help_text,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            **kwargs,
        )
        registry[name] = p
        _add_config_flag(p)
        return p

    p = sub("warp", "Warp an image into a target view using its depth map.")
    p.add_argument("--image", required=True, help="source image PNG")
    p.add_argument("--depth", required=True, help="source depth .dpt file")
    p.add_argument("--camera", required=True,
                   help="camera JSON: intrinsics plus source-to-target pose")
    p.add_argument("--mode", choices=["forward", "inverse"], default="forward",
                   help="forward splatting or inverse flow gathering")
    p.add_argument("--out", required=True, help="output PNG path, or - for stdout")
    p.add_argument("--mask", help="optional output PNG for the occlusion mask")
    p.add_argument("--min-size", type=int, default=0,
                   help="if > 0, filter the mask so no hole is smaller than this")

    p = sub("embed", "Produce warped multi-band coordinate embeddings.")
    p.add_argument("--depth", required=True, help="source depth .dpt file")
    p.add_argument("--camera", required=True,
                   help="camera JSON: intrinsics plus source-to-target pose")
    p.add_argument("--bands", type=int, default=6, help="frequency bands per axis")
    p.add_argument("--scale", type=int, default=8,
                   help="latent downscale factor applied to the camera grid")
    p.add_argument("--out", required=True,
                   help="output .dpt plane stack (4 * bands channels), or -")
    p.add_argument("--mask", help="optional output PNG for the embedding holes")

    p = sub("mask-filter", "Expand occlusion-mask components to a minimum size.")
    p.add_argument("--mask", required=True, help="input mask PNG (255 = hole)")
    p.add_argument("--min-size", type=int, default=8,
                   help="minimum bounding-box side in pixels")
    p.add_argument("--out", required=True, help="output mask PNG, or - for stdout")

    p = sub("attention-demo",
            "Render cross/self attention heatmaps for one query token.")
    p.add_argument("--depth", required=True, help="source depth .dpt file")
    p.add_argument("--camera", required=True,
                   help="camera JSON: intrinsics plus source-to-target pose")
    p.add_argument("--bands", type=int, default=6, help="frequency bands per axis")
    p.add_argument("--scale", type=int, default=8,
                   help="latent downscale factor applied to the camera grid")
    p.add_argument("--query", default=None,
                   help="query token as u,v on the latent grid (default: center)")
    p.add_argument("--out-cross", required=True,
                   help="output PNG heatmap of attention into the source view")
    p.add_argument("--out-self", required=True,
                   help="output PNG heatmap of attention within the target view")

    p = sub("align", "Estimate a relative pose from matches and source depth.")
    p.add_argument("--matches", required=True, help="input .mch match file")
    p.add_argument("--depth", required=True, help="source depth .dpt file")
    p.add_argument("--camera", required=True, help="camera JSON (intrinsics used)")
    p.add_argument("--out", required=True,
                   help="output camera JSON with the estimated pose, or -")
    p.add_argument("--threshold", type=float, default=2.0,
                   help="inlier reprojection threshold in pixels")
    p.add_argument("--confidence", type=float, default=0.999,
                   help="target probability of sampling an outlier-free subset")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--max-iterations", type=int, default=1000,
                   help="sampling iteration cap")

    p = sub("prepare", "Scan a dataset tree and write a frame-pair manifest.")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="manifest JSONL path, or -")
    p.add_argument("--min-interval", type=int, default=datapipe.DEFAULT_MIN_INTERVAL,
                   help="smallest frame index gap to sample")
    p.add_argument("--max-interval", type=int, default=datapipe.DEFAULT_MAX_INTERVAL,
                   help="largest frame index gap to sample")
    p.add_argument("--conf-threshold", type=float,
                   default=datapipe.DEFAULT_CONF_THRESHOLD,
                   help="drop pairs whose mean depth confidence falls below this")
    p.add_argument("--stride", type=int, default=datapipe.DEFAULT_STRIDE,
                   help="anchor stride along each sequence")
    p.add_argument("--partners", type=int, default=1,
                   help="sampled partners per anchor frame")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads across sequences")
    p.add_argument("--threshold", type=float, default=2.0,
                   help="pose alignment inlier threshold in pixels")
    p.add_argument("--tag", default="dataset", help="dataset tag recorded per pair")

    p = sub("synth", "Generate a synthetic scene (two views, or a dataset tree).")
    p.add_argument("--scene",
                   choices=["plane", "rotation", "two-plane", "tilted", "fixture"],
                   default="two-plane", help="scene family to generate")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--size", default="192x144", help="image size as WxH")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--baseline", type=float, default=0.5,
                   help="camera baseline in scene units (translation scenes)")
    p.add_argument("--plane-depth", type=float, default=4.0,
                   help="depth of the single plane (plane/rotation/tilted scenes)")
    p.add_argument("--z-near", type=float, default=2.0,
                   help="foreground depth (two-plane scene)")
    p.add_argument("--z-far", type=float, default=6.0,
                   help="background depth (two-plane scene)")
    p.add_argument("--square", type=float, default=60.0,
                   help="foreground square side in pixels (two-plane scene)")
    p.add_argument("--wavelength", type=float, default=96.0,
                   help="texture wavelength in pixels")
    p.add_argument("--axis-angle", default="0.02,-0.035,0.015",
                   help="rotation between views as rx,ry,rz (rotation scene)")
    p.add_argument("--sequences", type=int, default=2,
                   help="sequence count (fixture scene)")
    p.add_argument("--frames", type=int, default=140,
                   help="frames per sequence (fixture scene)")

    p = sub("selftest", "Run the built-in verification suite and report results.")
    p.add_argument("--only", type=int, default=None,
                   help="run a single check by its index")

    return parser, registry


def _load_config(path: str, sub: argparse.ArgumentParser) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a JSON object")
    known = {action.dest for action in sub._actions}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def _emit_file(out: str, suffix: str, writer) -> None:
    """Run writer(path); stream the bytes to stdout when out is '-'."""
    if out == "-":
        with tempfile.NamedTemporaryFile(suffix=suffix) as handle:
            writer(handle.name)
            sys.stdout.buffer.write(Path(handle.name).read_bytes())
            sys.stdout.buffer.flush()
    else:
        writer(out)


def _note(message: str) -> None:
    print(message, file=sys.stderr)


def _load_pair(depth_path: str, camera_path: str):
    depth = io.load_depth(depth_path)
    intrinsics, pose = io.load_camera(camera_path)
    return depth, intrinsics, pose


def _subsampled(depth: DepthMap, intrinsics: CameraIntrinsics, scale: int):
    if scale <= 1:
        return depth, intrinsics
    height, width = depth.shape
    if width % scale or height % scale:
        raise UsageError(
            f"--scale {scale} does not divide the {width}x{height} depth grid"
        )
    values = depth.values[scale // 2 :: scale, scale // 2 :: scale]
    valid = depth.valid[scale // 2 :: scale, scale // 2 :: scale]
    conf = depth.confidence
    if conf is not None:
        conf = conf[scale // 2 :: scale, scale // 2 :: scale]
    return DepthMap(values, valid, conf), intrinsics.scaled(1.0 / scale)


def cmd_warp(args) -> int:
    image = io.load_image(args.image)
    depth, intrinsics, pose = _load_pair(args.depth, args.camera)
    warp = forward_warp if args.mode == "forward" else inverse_warp
    warped, mask = warp(image, depth, pose, intrinsics)
    if args.min_size > 0:
        mask = filter_occlusion_mask(mask, args.min_size)
    _emit_file(args.out, ".png", lambda p: io.save_image(p, warped))
    if args.mask:
        io.save_mask(args.mask, mask)
    _note(
        f"{args.mode} warp: {warped.shape[1]}x{warped.shape[0]} px, "
        f"{mask.count()} hole px"
    )
    return 0


def cmd_embed(args) -> int:
    depth, intrinsics, pose = _load_pair(args.depth, args.camera)
    depth, intrinsics = _subsampled(depth, intrinsics, args.scale)
    embedding, mask = warped_coord_embedding(depth, pose, intrinsics,
                                             num_bands=args.bands)
    _emit_file(args.out, ".dpt", lambda p: io.save_planes(p, embedding.data))
    if args.mask:
        io.save_mask(args.mask, mask)
    height, width = embedding.data.shape[:2]
    _note(
        f"embedding: {width}x{height} grid, "
        f"{embedding.channels} channels, {mask.count()} hole px"
    )
    return 0


def cmd_mask_filter(args) -> int:
    mask = io.load_mask(args.mask)
    filtered = filter_occlusion_mask(mask, args.min_size)
    _emit_file(args.out, ".png", lambda p: io.save_mask(p, filtered))
    _note(f"mask filter: {mask.count()} -> {filtered.count()} hole px")
    return 0


def cmd_attention_demo(args) -> int:
    depth, intrinsics, pose = _load_pair(args.depth, args.camera)
    depth, intrinsics = _subsampled(depth, intrinsics, args.scale)
    height, width = depth.shape
    if args.query is None:
        qu, qv = width // 2, height // 2
    else:
        try:
            qu, qv = (int(part) for part in args.query.split(","))
        except ValueError:
            raise UsageError("--query must be two integers: u,v")
    if not (0 <= qu < width and 0 <= qv < height):
        raise UsageError(
            f"--query {qu},{qv} outside the {width}x{height} latent grid"
        )

    warped, mask = warped_coord_embedding(depth, pose, intrinsics,
                                          num_bands=args.bands)
    tokens_j = warped.data.reshape(-1, warped.channels)
    tokens_i = fourier_encode(
        canonical_coords(width, height), num_bands=args.bands
    ).data.reshape(-1, warped.channels)
    result = augmented_attention(tokens_i, tokens_j)
    cross, self_ = attention_heatmaps(result, qv * width + qu, (height, width))

    def save_heat(path: str, grid) -> None:
        colored = apply_colormap(grid.data[..., 0]).astype(np.float64) / 255.0
        io.save_image(path, FeatureGrid(colored))

    _emit_file(args.out_cross, ".png", lambda p: save_heat(p, cross))
    _emit_file(args.out_self, ".png", lambda p: save_heat(p, self_))
    qtoken = qv * width + qu
    _note(
        f"attention demo: query ({qu},{qv}) "
        f"cross mass {float(result.cross_mass()[qtoken]):.4f}, "
        f"self mass {float(result.self_mass()[qtoken]):.4f}, "
        f"query in hole: {bool(mask.holes[qv, qu])}"
    )
    return 0


def cmd_align(args) -> int:
    matches = io.load_matches(args.matches)
    depth, intrinsics, _ = _load_pair(args.depth, args.camera)
    correspondences = depth_to_correspondences(depth, matches, intrinsics)
    estimate = pnp_ransac(
        correspondences,
        intrinsics,
        inlier_threshold=args.threshold,
        confidence=args.confidence,
        seed=args.seed,
        max_iterations=args.max_iterations,
    )
    _emit_file(
        args.out, ".json",
        lambda p: io.save_camera(p, intrinsics, estimate.pose),
    )
    _note(
        f"alignment: {len(estimate.inliers)}/{len(correspondences)} inliers, "
        f"reprojection rmse {estimate.reprojection_rmse:.4f} px"
    )
    return 0


def cmd_prepare(args) -> int:
    config = datapipe.PipelineConfig(
        min_interval=args.min_interval,
        max_interval=args.max_interval,
        stride=args.stride,
        partners_per_anchor=args.partners,
        conf_threshold=args.conf_threshold,
        seed=args.seed,
        threads=args.threads,
        inlier_threshold=args.threshold,
        dataset_tag=args.tag,
        out=None if args.out == "-" else args.out,
    )
    manifest = datapipe.build_manifest(args.root, config)
    if args.out == "-":
        sys.stdout.write(datapipe.manifest_text(manifest))
        sys.stdout.flush()
    stats = manifest.stats
    _note(
        f"prepare: {len(manifest.records)} pairs kept of {stats['sampled']} sampled "
        f"({stats['excluded_confidence']} low-confidence, "
        f"{stats['excluded_error']} errored)"
    )
    return 0


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise UsageError("--size must look like 192x144")
    if w < 2 or h < 2:
        raise UsageError("--size must be at least 2x2")
    return w, h


def _parse_axis_angle(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        parts = []
    if len(parts) != 3:
        raise UsageError("--axis-angle must be three comma-separated numbers")
    return np.asarray(parts)


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.scene == "fixture":
        datapipe.make_fixture(out, sequences=args.sequences, frames=args.frames,
                              seed=args.seed)
        _note(f"fixture: {args.sequences} sequences x {args.frames} frames at {out}")
        return 0

    width, height = _parse_size(args.size)
    intrinsics = CameraIntrinsics(fx=1.25 * width, fy=1.25 * width,
                                  cx=width / 2.0, cy=height / 2.0,
                                  width=width, height=height)
    if args.scene == "plane":
        scene = synthoracle.single_plane_scene(
            intrinsics, depth=args.plane_depth,
            relative_pose=RigidPose(np.eye(3), [-args.baseline, 0.0, 0.0]),
            wavelength_px=args.wavelength, seed=args.seed)
    elif args.scene == "rotation":
        scene = synthoracle.rotation_pair_scene(
            intrinsics, _parse_axis_angle(args.axis_angle),
            depth=args.plane_depth, wavelength_px=args.wavelength, seed=args.seed)
    elif args.scene == "two-plane":
        scene = synthoracle.two_plane_scene(
            intrinsics, z_near=args.z_near, z_far=args.z_far,
            baseline=args.baseline, square_size_px=args.square,
            wavelength_px=args.wavelength, seed=args.seed)
    else:
        scene = synthoracle.tilted_plane_scene(
            intrinsics, center_depth=args.plane_depth,
            relative_pose=RigidPose(np.eye(3), [-args.baseline, 0.0, 0.0]),
            wavelength_px=args.wavelength, seed=args.seed)

    out.mkdir(parents=True, exist_ok=True)
    for index in range(2):
        image, depth = synthoracle.render(scene, index)
        io.save_image(out / f"view{index}.png", image)
        io.save_depth(out / f"view{index}.dpt", depth)
        _, extrinsic = scene.cameras[index]
        io.save_camera(out / f"camera{index}.json", intrinsics, extrinsic)
    io.save_camera(out / "relative.json", intrinsics, scene.relative_pose(0, 1))
    _note(f"synth {args.scene}: two {width}x{height} views at {out}")
    return 0


def cmd_selftest(args) -> int:
    checks = selfcheck.CHECKS
    if args.only is not None:
        checks = [entry for entry in checks if entry[0] == args.only]
        if not checks:
            raise UsageError(f"--only {args.only}: no such check")
    results = [selfcheck.run_check(*entry) for entry in checks]
    print(selfcheck.format_results(results))
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "warp": cmd_warp,
    "embed": cmd_embed,
    "mask-filter": cmd_mask_filter,
    "attention-demo": cmd_attention_demo,
    "align": cmd_align,
    "prepare": cmd_prepare,
    "synth": cmd_synth,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        if getattr(args, "config", None):
            sub = registry[args.command]
            sub.set_defaults(**_load_config(args.config, sub))
            args = parser.parse_args(argv)
        return HANDLERS[args.command](args)
    except UsageError as exc:
        _note(f"usage error: {exc}")
        return 2
    except ViewWarpError as exc:
        _note(f"error: {exc}")
        return 1
    except OSError as exc:
        _note(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
