import numpy as np
import pytest

from viewwarp import CameraIntrinsics, RigidPose


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_intrinsics(width=64, height=48, f=80.0):
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


def random_pose(rng, max_angle=0.4, trans_scale=0.3):
    axis = rng.normal(size=3)
    axis *= rng.uniform(0.0, max_angle) / np.linalg.norm(axis)
    return RigidPose.from_axis_angle(axis, rng.normal(scale=trans_scale, size=3))


def rotation_error(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
