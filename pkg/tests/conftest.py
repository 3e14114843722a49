import numpy as np
import pytest

from splatrig.geometry import RigidTransform
from splatrig.renderer import Camera
from splatrig.splat_io import SplatScene


def random_unit_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def make_scene(rng, n=50, sh_degree=1, extent=1.0, scale_range=(-4.0, -1.5)):
    basis = (sh_degree + 1) ** 2
    return SplatScene(
        means=rng.uniform(-extent, extent, size=(n, 3)),
        rotations=random_unit_quats(rng, n),
        scales=np.exp(rng.uniform(*scale_range, size=(n, 3))),
        opacities=rng.uniform(0.05, 1.0, size=n),
        sh=rng.normal(scale=0.5, size=(n, 3, basis)),
        sh_degree=sh_degree,
    )


def make_camera(width=64, height=64, f=60.0, dist=3.0, rotation=None):
    R = np.eye(3) if rotation is None else rotation
    return Camera(
        fx=f,
        fy=f,
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        world_to_cam=RigidTransform(R, np.array([0.0, 0.0, dist])),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
