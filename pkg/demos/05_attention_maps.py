"""Occlusion-aware augmented attention.

Novel-view tokens attend over the concatenation of source-view tokens and
their own tokens. The resulting map splits into a cross part (how much a
query looks back at the source view) and a self part (how much it relies
on its own context). Queries sitting in disoccluded holes receive no
geometric signal, so their mass shifts measurably toward self-attention —
the mechanism that lets a generator fall back to synthesis exactly where
warping is blind.

    python3 demos/05_attention_maps.py [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from viewwarp import (
    CameraIntrinsics,
    FeatureGrid,
    apply_colormap,
    attention_heatmaps,
    augmented_attention,
    canonical_coords,
    fourier_encode,
    warped_coord_embedding,
)
from viewwarp import io as vio
from viewwarp.synthoracle import render, two_plane_scene


def save_heat(path: Path, grid) -> None:
    colored = apply_colormap(grid.data[..., 0]).astype(np.float64) / 255.0
    vio.save_image(path, FeatureGrid(colored))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demos/output", help="artifact directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    width, height = 48, 36
    intrinsics = CameraIntrinsics(fx=60.0, fy=60.0, cx=width / 2, cy=height / 2,
                                  width=width, height=height)
    scene = two_plane_scene(intrinsics, z_near=2.0, z_far=6.0, baseline=0.35,
                            square_size_px=16.0, seed=6)
    _, depth = render(scene, 0)
    pose = scene.relative_pose(0, 1)

    warped, mask = warped_coord_embedding(depth, pose, intrinsics, num_bands=6)
    source = fourier_encode(canonical_coords(width, height), num_bands=6)
    tokens_i = source.data.reshape(-1, source.channels)
    tokens_j = warped.data.reshape(-1, warped.channels)

    result = augmented_attention(tokens_i, tokens_j)
    self_mass = result.self_mass()
    holes = mask.holes.ravel()
    print(f"{holes.sum()} hole tokens / {holes.size} total")
    print(f"mean self-attention mass on hole queries:   {self_mass[holes].mean():.4f}")
    print(f"mean self-attention mass on warped queries: {self_mass[~holes].mean():.4f}")
    print(f"margin: {self_mass[holes].mean() - self_mass[~holes].mean():+.4f} "
          "(holes lean on the generative side)")

    hole_q = int(np.flatnonzero(holes)[len(np.flatnonzero(holes)) // 2])
    warm_q = int(np.flatnonzero(~holes)[holes.size // 3])
    for label, q in (("hole", hole_q), ("warped", warm_q)):
        cross, self_ = attention_heatmaps(result, q, (height, width))
        save_heat(out / f"attn_cross_{label}_query.png", cross)
        save_heat(out / f"attn_self_{label}_query.png", self_)
        print(f"{label} query token {q}: cross mass "
              f"{float(result.cross_mass()[q]):.4f}, "
              f"self mass {float(self_mass[q]):.4f}")

    vio.save_mask(out / "attn_holes.png", mask)
    print(f"\nwrote {out}/attn_cross_*.png, attn_self_*.png, attn_holes.png")


if __name__ == "__main__":
    main()
