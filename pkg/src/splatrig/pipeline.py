"""Dataset generation: drive the rig and renderer per trajectory state and
emit (frame image, action) pairs plus a CSV manifest.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .kinematics import JointState, KinematicModel
from .renderer import Camera, Image, RasterParams, rasterize
from .rigging import SceneRig, pose_scene
from .trajectory import TrajectoryLog

log = logging.getLogger(__name__)

MANIFEST_HEADER = ["t", "camera_id", "image_path", "px", "py", "pz", "qw", "qx", "qy", "qz"]


def save_png(img: Image, path) -> None:
    PILImage.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def load_png(path) -> Image:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return Image(width=arr.shape[1], height=arr.shape[0], pixels=arr)


@dataclass(frozen=True)
class RenderedFrame:
    image: Image
    camera_id: str
    t: int
    action_position: np.ndarray
    action_orientation: np.ndarray


def frame_filename(t: int, camera_id: str) -> str:
    return f"t{t:06d}_{camera_id}.png"


def frame_plan(log_: TrajectoryLog, cameras: dict) -> list[tuple[int, str, str]]:
    """The (t, camera_id, filename) rows render_trajectory will produce."""
    return [
        (state.t, cam_id, frame_filename(state.t, cam_id))
        for state in log_.states
        for cam_id in cameras
    ]


def render_trajectory(
    log_: TrajectoryLog,
    rig: SceneRig,
    model: KinematicModel,
    cameras: dict,
    out_dir,
    params: RasterParams | None = None,
    clamp_limits: bool = False,
) -> list[dict]:
    """Render every (state, camera) pair and write frames plus manifest.csv.

    Returns the manifest rows.  Frames are independent; the manifest is
    assembled in timestep order.
    """
    missing = [o for o in log_.object_ids if o not in rig.objects]
    if missing:
        raise ValueError(f"rig does not cover trajectory objects: {missing}")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for state in log_.states:
        try:
            scene = pose_scene(rig, model, JointState(state.q), state.aperture,
                               state.object_poses, clamp_limits)
        except Exception as e:
            raise type(e)(f"t={state.t}: {e}") from e
        for cam_id, cam in cameras.items():
            img = rasterize(scene, cam, params)
            name = frame_filename(state.t, cam_id)
            save_png(img, os.path.join(out_dir, name))
            p = state.action_position
            q = state.action_orientation
            rows.append(
                {
                    "t": state.t,
                    "camera_id": cam_id,
                    "image_path": name,
                    "px": repr(float(p[0])),
                    "py": repr(float(p[1])),
                    "pz": repr(float(p[2])),
                    "qw": repr(float(q[0])),
                    "qx": repr(float(q[1])),
                    "qy": repr(float(q[2])),
                    "qz": repr(float(q[3])),
                }
            )
        log.info("rendered t=%d (%d cameras)", state.t, len(cameras))
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=MANIFEST_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def read_manifest(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
