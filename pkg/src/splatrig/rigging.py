"""Pose the segmented splat scene at arbitrary simulator states.

Each robot link's Gaussians move by the conjugated chain

    T = T_sr^-1 o (fk[l] o capture_fk[l]^-1) o T_sr

where T_sr maps the splat frame into the robot frame and capture_fk holds
the link poses at the scan's capture state, so posing at the capture state
is the identity.  Object Gaussians move by

    T = T_sr^-1 o T_pose o T_obj_align

with T_pose built from the simulator-reported object pose and T_obj_align
the object's splat-to-simulator alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, compose, invert, quat_to_rotation, transform_means_quats
from .kinematics import FkResult, JointState, KinematicModel, forward_kinematics, mimic_joint_values
from .segmentation import STATIC, LinkAssignment
from .splat_io import SplatScene


class RiggingError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectPose:
    position: np.ndarray     # (3,) meters
    orientation: np.ndarray  # (4,) unit quaternion, w x y z

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise RiggingError(f"orientation quaternion norm {n:.8f} not 1 within 1e-6")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q / n)

    def transform(self) -> RigidTransform:
        return RigidTransform(quat_to_rotation(self.orientation), self.position)


@dataclass(frozen=True)
class RiggedObject:
    scene: SplatScene
    align: RigidTransform  # object splat frame -> object simulator frame


@dataclass(frozen=True)
class SceneRig:
    static_scene: SplatScene          # aligned scene, robot at capture pose
    assignment: LinkAssignment
    link_names: tuple                 # link index -> model link name
    T_splat_robot: RigidTransform
    capture_fk: FkResult
    objects: dict                     # name -> RiggedObject, insertion order fixed

    def __post_init__(self):
        if len(self.assignment) != len(self.static_scene):
            raise RiggingError("assignment length does not match scene")
        present = set(np.unique(self.assignment.labels)) - {STATIC}
        for l in present:
            if self.link_names[l] not in self.capture_fk:
                raise RiggingError(f"capture_fk missing link {self.link_names[l]!r}")


def link_transform(rig: SceneRig, l: int, fk: FkResult) -> RigidTransform:
    """Splat-frame transform for link l at the given FK state."""
    if not 0 <= l < len(rig.link_names):
        raise RiggingError(f"unknown link index {l}")
    name = rig.link_names[l]
    if name not in fk:
        raise RiggingError(f"FK result missing link {name!r}")
    inv_sr = invert(rig.T_splat_robot)
    rel = compose(fk[name], invert(rig.capture_fk[name]))
    return compose(inv_sr, compose(rel, rig.T_splat_robot))


def object_transform(rig: SceneRig, name: str, pose: ObjectPose) -> RigidTransform:
    """Splat-frame transform placing object `name` at the simulator pose."""
    if name not in rig.objects:
        raise RiggingError(f"unknown object {name!r}")
    inv_sr = invert(rig.T_splat_robot)
    return compose(inv_sr, compose(pose.transform(), rig.objects[name].align))


def pose_scene(
    rig: SceneRig,
    model: KinematicModel,
    q: JointState,
    aperture: float,
    object_poses: dict | None = None,
    clamp_limits: bool = False,
) -> SplatScene:
    """Pose the rig at a simulator state and return the combined scene.

    Static Gaussians pass through untouched; link-labeled Gaussians move by
    their link transform; each object's Gaussians are transformed and
    appended in the rig's object order.
    """
    object_poses = object_poses or {}
    fk = forward_kinematics(model, q, mimic_joint_values(model, aperture), clamp_limits)

    scene = rig.static_scene
    means = scene.means.copy()
    quats = scene.rotations.copy()
    labels = rig.assignment.labels
    for l in np.unique(labels):
        if l == STATIC:
            continue
        T = link_transform(rig, int(l), fk)
        mask = labels == l
        means[mask], quats[mask] = transform_means_quats(scene.means[mask], scene.rotations[mask], T)

    parts_means = [means]
    parts_quats = [quats]
    parts_scales = [scene.scales]
    parts_op = [scene.opacities]
    parts_sh = [scene.sh]
    for name, obj in rig.objects.items():
        if name not in object_poses:
            raise RiggingError(f"no pose given for object {name!r}")
        if obj.scene.sh_degree != scene.sh_degree:
            raise RiggingError(f"object {name!r} sh_degree differs from scene")
        T = object_transform(rig, name, object_poses[name])
        m, r = transform_means_quats(obj.scene.means, obj.scene.rotations, T)
        parts_means.append(m)
        parts_quats.append(r)
        parts_scales.append(obj.scene.scales)
        parts_op.append(obj.scene.opacities)
        parts_sh.append(obj.scene.sh)

    return SplatScene(
        means=np.concatenate(parts_means),
        rotations=np.concatenate(parts_quats),
        scales=np.concatenate(parts_scales),
        opacities=np.concatenate(parts_op),
        sh=np.concatenate(parts_sh),
        sh_degree=scene.sh_degree,
        source_label=scene.source_label,
    )
