"""Pipeline configuration: one YAML file naming every input artifact and
parameter block, plus helpers that assemble a SceneRig from it and the
persisted alignment/assignment outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .alignment import AlignmentResult, IcpParams, load_xyz_points, rescale_scene
from .augment import AugmentParams
from .geometry import RigidTransform, quat_to_rotation
from .kinematics import KinematicModel, gripper_fk, JointState, forward_kinematics, mimic_joint_values, parse_kinematic_model
from .renderer import Camera, RasterParams, load_cameras
from .rigging import RiggedObject, SceneRig
from .segmentation import LinkAssignment, load_assignment
from .splat_io import SplatScene, parse_splat_ply


class ConfigError(ValueError):
    pass


def _box(entry) -> tuple:
    lo, hi = entry["min"], entry["max"]
    return (np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64))


def _transform(entry) -> RigidTransform:
    if entry is None:
        return RigidTransform.identity()
    q = entry.get("quat", [1, 0, 0, 0])
    t = entry.get("translation", [0, 0, 0])
    return RigidTransform(quat_to_rotation(np.asarray(q, dtype=np.float64) /
                                           np.linalg.norm(q)), t)


@dataclass(frozen=True)
class PipelineConfig:
    scene_ply: str
    kinematic_model: str
    cameras: str
    output_dir: str
    robot_points: str | None = None
    knn_points: str | None = None
    object_plys: dict = field(default_factory=dict)       # name -> path
    object_aligns: dict = field(default_factory=dict)     # name -> RigidTransform
    crop_box: tuple | None = None                          # splat frame
    gripper_region: tuple | None = None                    # robot frame
    aabb_boxes: dict = field(default_factory=dict)         # link name -> box (link-local)
    icp: IcpParams = field(default_factory=IcpParams)
    icp_init: RigidTransform = field(default_factory=RigidTransform.identity)
    capture_q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    capture_aperture: float = 0.0
    knn_k: int = 5
    clamp_limits: bool = False
    augment: AugmentParams = field(default_factory=AugmentParams)
    raster: RasterParams = field(default_factory=RasterParams)
    seed: int = 0
    base_dir: str = "."

    def path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)


def load_config(path) -> PipelineConfig:
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    base = os.path.dirname(os.path.abspath(path))
    try:
        icp_block = data.get("icp", {})
        init = _transform(icp_block.pop("init", None)) if "init" in icp_block else RigidTransform.identity()
        aug = data.get("augment", {})
        raster = data.get("render", {})
        cfg = PipelineConfig(
            scene_ply=data["scene_ply"],
            kinematic_model=data["kinematic_model"],
            cameras=data["cameras"],
            output_dir=data.get("output_dir", "out"),
            robot_points=data.get("robot_points"),
            knn_points=data.get("knn_points"),
            object_plys={k: v["ply"] for k, v in data.get("objects", {}).items()},
            object_aligns={k: _transform(v.get("align")) for k, v in data.get("objects", {}).items()},
            crop_box=_box(data["crop_box"]) if "crop_box" in data else None,
            gripper_region=_box(data["gripper_region"]) if "gripper_region" in data else None,
            aabb_boxes={k: _box(v) for k, v in data.get("aabb_boxes", {}).items()},
            icp=IcpParams(**icp_block),
            icp_init=init,
            capture_q=np.asarray(data.get("capture_pose", {}).get("q", []), dtype=np.float64),
            capture_aperture=float(data.get("capture_pose", {}).get("aperture", 0.0)),
            knn_k=int(data.get("knn_k", 5)),
            clamp_limits=bool(data.get("clamp_limits", False)),
            augment=AugmentParams(
                noise_sigma=aug.get("noise_sigma", 5.0),
                erase_prob=aug.get("erase_prob", 0.5),
                erase_area=tuple(aug.get("erase_area", (0.02, 0.2))),
                brightness_range=tuple(aug.get("brightness_range", (0.8, 1.2))),
                contrast_range=tuple(aug.get("contrast_range", (0.8, 1.2))),
                seed=int(data.get("seed", 0)),
            ),
            raster=RasterParams(
                tile_size=int(raster.get("tile_size", 16)),
                alpha_min=float(raster.get("alpha_min", 1.0 / 255.0)),
                transmittance_min=float(raster.get("transmittance_min", 1e-4)),
                background=tuple(raster.get("background", (0.0, 0.0, 0.0))),
            ),
            seed=int(data.get("seed", 0)),
            base_dir=base,
        )
    except KeyError as e:
        raise ConfigError(f"missing config key: {e}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return cfg


def validate_config(cfg: PipelineConfig) -> list[str]:
    """Check referenced files exist and parse; returns human-readable notes."""
    notes = []
    for label, p in [
        ("scene_ply", cfg.scene_ply),
        ("kinematic_model", cfg.kinematic_model),
        ("cameras", cfg.cameras),
        *[(f"object {k}", v) for k, v in cfg.object_plys.items()],
        *([("robot_points", cfg.robot_points)] if cfg.robot_points else []),
        *([("knn_points", cfg.knn_points)] if cfg.knn_points else []),
    ]:
        full = cfg.path(p)
        if not os.path.isfile(full):
            raise ConfigError(f"{label}: file not found: {full}")
        notes.append(f"{label}: {full}")
    with open(cfg.path(cfg.kinematic_model)) as f:
        model = parse_kinematic_model(f.read())
    notes.append(f"kinematic model: {len(model.links)} links, "
                 f"{len(model.actuated_joints)} actuated joints")
    with open(cfg.path(cfg.cameras)) as f:
        cams = load_cameras(f.read())
    notes.append(f"cameras: {sorted(cams)}")
    return notes


def load_scene(cfg: PipelineConfig) -> SplatScene:
    with open(cfg.path(cfg.scene_ply), "rb") as f:
        return parse_splat_ply(f.read())


def load_model(cfg: PipelineConfig) -> KinematicModel:
    with open(cfg.path(cfg.kinematic_model)) as f:
        return parse_kinematic_model(f.read())


def load_camera_set(cfg: PipelineConfig) -> dict:
    with open(cfg.path(cfg.cameras)) as f:
        return load_cameras(f.read())


def save_alignment(result: AlignmentResult, path) -> None:
    with open(path, "w") as f:
        json.dump(result.to_dict(), f, indent=2)


def load_alignment(path) -> AlignmentResult:
    with open(path) as f:
        return AlignmentResult.from_dict(json.load(f))


def capture_fk(cfg: PipelineConfig, model: KinematicModel):
    q = JointState(cfg.capture_q if len(cfg.capture_q) else np.zeros(len(model.actuated_joints)))
    return forward_kinematics(model, q, mimic_joint_values(model, cfg.capture_aperture),
                              cfg.clamp_limits)


def build_rig(
    cfg: PipelineConfig,
    model: KinematicModel,
    alignment: AlignmentResult,
    assignment: LinkAssignment,
    link_names,
) -> SceneRig:
    scene = load_scene(cfg)
    if alignment.scale != 1.0:
        scene = rescale_scene(scene, alignment.scale)
    objects = {}
    for name, ply in cfg.object_plys.items():
        with open(cfg.path(ply), "rb") as f:
            objects[name] = RiggedObject(parse_splat_ply(f.read()), cfg.object_aligns[name])
    return SceneRig(
        static_scene=scene,
        assignment=assignment,
        link_names=tuple(link_names),
        T_splat_robot=alignment.transform,
        capture_fk=capture_fk(cfg, model),
        objects=objects,
    )
