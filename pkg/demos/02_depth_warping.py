"""Forward and inverse depth warping on an exactly known scene.

Renders a two-plane scene from one viewpoint, warps it to a second
viewpoint both by splatting (forward) and by gathering (inverse), and
compares each result against the ray-traced ground truth of the second
view. Artifacts land in demos/output/.

    python3 demos/02_depth_warping.py [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from viewwarp import CameraIntrinsics, forward_warp, inverse_warp
from viewwarp import io as vio
from viewwarp.synthoracle import bruteforce_warp, render, two_plane_scene


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demos/output", help="artifact directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    intrinsics = CameraIntrinsics(fx=240.0, fy=240.0, cx=192.0, cy=144.0,
                                  width=384, height=288)
    scene = two_plane_scene(intrinsics, z_near=2.0, z_far=6.0, baseline=0.5,
                            square_size_px=120.0, seed=3)
    image, depth = render(scene, 0)
    pose = scene.relative_pose(0, 1)
    truth, truth_mask = bruteforce_warp(scene, 0, 1)

    print("scene: floating square at 2 m over a background at 6 m,")
    print(f"       camera translates {pose.translation.tolist()} between views\n")

    fwd, fwd_mask = forward_warp(image, depth, pose, intrinsics)
    inv, inv_mask = inverse_warp(image, depth, pose, intrinsics)

    for name, warped, mask in (("forward", fwd, fwd_mask),
                               ("inverse", inv, inv_mask)):
        agree = ~mask.holes & ~truth_mask.holes
        err = np.abs(warped.data - truth.data)[agree].max() * 255.0
        print(f"{name:7s} warp: {mask.count():5d} hole px, "
              f"max error vs ray-traced truth {err:.3f}/255 "
              f"on {agree.sum()} shared pixels")

    print(f"oracle mask:  {truth_mask.count():5d} hole px "
          "(disocclusion band + frame-entry band)")
    print("inverse warping fills depth-consistent gaps, so it leaves "
          f"{fwd_mask.count() - inv_mask.count()} fewer hole px than forward")

    vio.save_image(out / "source_view.png", image)
    vio.save_image(out / "warp_forward.png", fwd)
    vio.save_image(out / "warp_inverse.png", inv)
    vio.save_image(out / "warp_truth.png", truth)
    vio.save_mask(out / "warp_forward_mask.png", fwd_mask)
    print(f"\nwrote {out}/source_view.png, warp_forward.png, "
          "warp_inverse.png, warp_truth.png, warp_forward_mask.png")


if __name__ == "__main__":
    main()
