"""Build a small but complete on-disk workspace: a rigged robot scene PLY,
kinematic model, camera calibration, reference clouds, config and
trajectory fixtures, for pipeline/CLI/acceptance tests."""

import json
import os

import numpy as np
import yaml

from splatrig.geometry import RigidTransform, rotation_to_quat
from splatrig.kinematics import JointState, forward_kinematics, mimic_joint_values, parse_kinematic_model
from splatrig.splat_io import SplatScene, write_splat_ply

MODEL_TEXT = """
link base
link l1
link l2
link l3
link l4
link l5
link l6
link finger_l
link finger_r
joint j1 revolute base l1 xyz=0,0,0.1 rpy=0,0,0 axis=0,0,1 limits=-3.2,3.2
joint j2 revolute l1 l2 xyz=0,0,0.15 rpy=1.5707963267948966,0,0 axis=0,0,1 limits=-3.2,3.2
joint j3 revolute l2 l3 xyz=0.3,0,0 rpy=0,0,0 axis=0,0,1 limits=-3.2,3.2
joint j4 revolute l3 l4 xyz=0.25,0,0.1 rpy=0,0,0 axis=0,0,1 limits=-3.2,3.2
joint j5 revolute l4 l5 xyz=0,0.08,0 rpy=-1.5707963267948966,0,0 axis=0,0,1 limits=-3.2,3.2
joint j6 revolute l5 l6 xyz=0,-0.08,0 rpy=1.5707963267948966,0,0 axis=0,0,1 limits=-3.2,3.2
joint fl prismatic l6 finger_l xyz=0,0.02,0.05 rpy=0,0,0 axis=0,1,0 limits=0,0.04
joint fr prismatic l6 finger_r xyz=0,-0.02,0.05 rpy=0,0,0 axis=0,-1,0 limits=0,0.04
mimic grip fl multiplier=1 offset=0
mimic grip fr multiplier=1 offset=0
"""

ARM_LINKS = ["l1", "l2", "l3", "l4", "l5", "l6", "finger_l", "finger_r"]

LINK_BOXES = {
    "l1": ([-0.04, -0.04, -0.02], [0.04, 0.04, 0.14]),
    "l2": ([-0.04, -0.04, -0.04], [0.32, 0.04, 0.04]),
    "l3": ([-0.04, -0.04, -0.04], [0.27, 0.04, 0.12]),
    "l4": ([-0.04, -0.04, -0.04], [0.04, 0.1, 0.04]),
    "l5": ([-0.04, -0.04, -0.04], [0.04, 0.04, 0.1]),
    "l6": ([-0.035, -0.06, -0.035], [0.035, 0.06, 0.048]),
    "finger_l": ([-0.015, -0.008, -0.001], [0.015, 0.008, 0.045]),
    "finger_r": ([-0.015, -0.008, -0.001], [0.015, 0.008, 0.045]),
}

CAPTURE_Q = [0.3, -0.4, 0.5, -0.2, 0.35, 0.1]
CAPTURE_APERTURE = 0.0


def sample_link_points(rng, n_per_link=120):
    """Surface-ish samples per link, in link-local frames."""
    out = {}
    for name in ARM_LINKS:
        lo, hi = (np.array(v, dtype=np.float64) for v in LINK_BOXES[name])
        pts = rng.uniform(lo, hi, size=(n_per_link, 3))
        out[name] = pts
    return out


def make_scene_fixture(rng, sh_degree=1, n_background=150, splat_from_robot=None):
    """Robot-frame Gaussian scene at the capture pose, mapped into a splat
    frame by the inverse of splat_from_robot (T mapping splat -> robot)."""
    model = parse_kinematic_model(MODEL_TEXT)
    fk = forward_kinematics(model, JointState(CAPTURE_Q),
                            mimic_joint_values(model, CAPTURE_APERTURE))
    local_pts = sample_link_points(rng)
    means_robot = []
    labels = []
    for idx, name in enumerate(ARM_LINKS):
        world = fk[name].apply(local_pts[name])
        means_robot.append(world)
        labels.extend([idx] * len(world))
    bg = rng.uniform(-1.2, 1.2, size=(n_background, 3))
    bg[:, 2] = np.abs(bg[:, 2]) * 0.05 - 0.05  # a floor-ish slab
    far = np.linalg.norm(bg[:, :2], axis=1) > 0.75  # keep clear of the arm
    bg = bg[far]
    means_robot.append(bg)
    labels.extend([-1] * len(bg))
    means_robot = np.concatenate(means_robot)
    labels = np.array(labels, dtype=np.int32)

    T_sr = splat_from_robot or RigidTransform.identity()
    # scene lives in splat frame: splat = T_sr^-1(robot)
    means_splat = (means_robot - T_sr.translation) @ T_sr.rotation

    n = len(means_splat)
    basis = (sh_degree + 1) ** 2
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    sh = rng.normal(scale=0.3, size=(n, 3, basis))
    sh[:, :, 0] += 0.5
    scene = SplatScene(
        means=means_splat,
        rotations=q,
        scales=np.exp(rng.uniform(-5.0, -3.8, size=(n, 3))),
        opacities=rng.uniform(0.5, 1.0, size=n),
        sh=sh,
        sh_degree=sh_degree,
    )
    return scene, labels, means_robot, fk, model


def make_object_scene(rng, n=40, half=0.03, sh_degree=1):
    basis = (sh_degree + 1) ** 2
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    sh = rng.normal(scale=0.3, size=(n, 3, basis))
    sh[:, 0, 0] += 1.0  # reddish
    return SplatScene(
        means=rng.uniform(-half, half, size=(n, 3)),
        rotations=q,
        scales=np.exp(rng.uniform(-5.5, -4.5, size=(n, 3))),
        opacities=rng.uniform(0.6, 1.0, size=n),
        sh=sh,
        sh_degree=sh_degree,
    )


def camera_json(width=64, height=64):
    def entry(cid, yaw, dist=1.6, z=0.7):
        c, s = np.cos(yaw), np.sin(yaw)
        pos = np.array([dist * c, dist * s, z])
        target = np.array([0.0, 0.0, 0.25])
        fwd = target - pos
        fwd /= np.linalg.norm(fwd)
        up = np.array([0.0, 0.0, -1.0])
        right = np.cross(fwd, up)
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R_wc = np.stack([right, down, fwd])  # rows: cam axes in world
        t = -R_wc @ pos
        qw, qx, qy, qz = rotation_to_quat(R_wc)
        return dict(id=cid, fx=width * 1.2, fy=width * 1.2, cx=width / 2, cy=height / 2,
                    width=width, height=height, qw=qw, qx=qx, qy=qy, qz=qz,
                    tx=t[0], ty=t[1], tz=t[2], near=0.05, far=10.0)

    return {"cameras": [entry("cam0", 0.4), entry("cam1", 2.2)]}


def trajectory_text(n_states, rng, with_object=True):
    lines = []
    for t in range(n_states):
        q = np.array(CAPTURE_Q) + 0.25 * np.sin(0.3 * t + np.arange(6))
        grip = 0.5 + 0.5 * np.sin(0.2 * t)
        qs = ",".join(f"{v:.6f}" for v in q)
        obj = ""
        if with_object:
            pos = [0.45 + 0.01 * t, 0.1, 0.03]
            obj = f" obj:cube={pos[0]:.4f},{pos[1]:.4f},{pos[2]:.4f},1,0,0,0"
        act = f"act=0.4,{0.01 * t:.4f},0.3,1,0,0,0"
        lines.append(f"t={t} q={qs} grip={grip:.4f}{obj} {act}")
    return "\n".join(lines) + "\n"


def write_workspace(root, rng, width=64, height=64, n_states=2, sh_degree=1,
                    splat_from_robot=None, image_noise=0.0):
    """Write every input file plus config.yaml; returns paths dict."""
    os.makedirs(root, exist_ok=True)
    T_sr = splat_from_robot or RigidTransform.identity()
    scene, labels, means_robot, fk, model = make_scene_fixture(
        rng, sh_degree=sh_degree, splat_from_robot=T_sr
    )
    paths = {"root": root}

    with open(os.path.join(root, "scene.ply"), "wb") as f:
        f.write(write_splat_ply(scene))
    with open(os.path.join(root, "cube.ply"), "wb") as f:
        f.write(write_splat_ply(make_object_scene(rng, sh_degree=sh_degree)))
    with open(os.path.join(root, "robot.model"), "w") as f:
        f.write(MODEL_TEXT)
    with open(os.path.join(root, "cameras.json"), "w") as f:
        json.dump(camera_json(width, height), f)
    # robot reference cloud: the robot-labeled means, in robot frame
    robot_mask = labels >= 0
    with open(os.path.join(root, "robot_points.txt"), "w") as f:
        for p in means_robot[robot_mask]:
            f.write(f"{p[0]:.9f} {p[1]:.9f} {p[2]:.9f}\n")
    # finger training points in robot frame, labeled with finger link ids
    with open(os.path.join(root, "knn_points.txt"), "w") as f:
        for name, lab in (("finger_l", 6), ("finger_r", 7)):
            lo, hi = (np.array(v) for v in LINK_BOXES[name])
            pts = fk[name].apply(rng.uniform(lo, hi, size=(150, 3)))
            for p in pts:
                f.write(f"{p[0]:.9f} {p[1]:.9f} {p[2]:.9f} {lab}\n")
    with open(os.path.join(root, "traj.log"), "w") as f:
        f.write(trajectory_text(n_states, rng))

    splat_robot_pts = scene.means[robot_mask]
    lo = splat_robot_pts.min(axis=0) - 0.05
    hi = splat_robot_pts.max(axis=0) + 0.05
    fingers_lo = np.minimum(fk["finger_l"].translation, fk["finger_r"].translation) - 0.08
    fingers_hi = np.maximum(
        fk["finger_l"].apply([0, 0, 0.05]), fk["finger_r"].apply([0, 0, 0.05])
    ) + 0.08

    cfg = {
        "scene_ply": "scene.ply",
        "kinematic_model": "robot.model",
        "cameras": "cameras.json",
        "robot_points": "robot_points.txt",
        "knn_points": "knn_points.txt",
        "output_dir": "out",
        "objects": {"cube": {"ply": "cube.ply"}},
        "crop_box": {"min": lo.tolist(), "max": hi.tolist()},
        "gripper_region": {"min": fingers_lo.tolist(), "max": fingers_hi.tolist()},
        "aabb_boxes": {
            name: {"min": list(LINK_BOXES[name][0]), "max": list(LINK_BOXES[name][1])}
            for name in ARM_LINKS
        },
        "icp": {"max_correspondence_dist": 0.2},
        "capture_pose": {"q": CAPTURE_Q, "aperture": CAPTURE_APERTURE},
        "knn_k": 5,
        "seed": 42,
        "augment": {"noise_sigma": image_noise, "erase_prob": 0.5},
    }
    with open(os.path.join(root, "config.yaml"), "w") as f:
        yaml.safe_dump(cfg, f)

    paths.update(
        config=os.path.join(root, "config.yaml"),
        traj=os.path.join(root, "traj.log"),
        out=os.path.join(root, "out"),
        scene=scene,
        labels=labels,
        model=model,
        capture_fk=fk,
        T_sr=T_sr,
    )
    return paths
