"""Serial-chain forward kinematics from a minimal declarative model format.

Model files are line-oriented text:

    link NAME
    joint NAME TYPE PARENT CHILD xyz=X,Y,Z rpy=R,P,Y axis=X,Y,Z limits=LO,HI
    mimic GROUP JOINT multiplier=M offset=O

TYPE is revolute (radians), prismatic (meters) or fixed.  Origin rotations
are roll-pitch-yaw, extrinsic x-y-z.  A mimic group maps one scalar (the
gripper aperture in [0, 1]) onto several joints: each joint's travel
fraction is clip(multiplier * aperture + offset, 0, 1) across [lo, hi].
Mimic joints are excluded from JointState.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform, compose, rpy_to_rotation


class KinematicsError(ValueError):
    pass


class JointLimitError(KinematicsError):
    pass


JOINT_TYPES = ("revolute", "prismatic", "fixed")


@dataclass(frozen=True)
class Joint:
    name: str
    type: str
    parent: str
    child: str
    origin: RigidTransform
    axis: np.ndarray
    limits: tuple[float, float]
    mimic_group: str | None = None
    mimic_multiplier: float = 1.0
    mimic_offset: float = 0.0


@dataclass(frozen=True)
class KinematicModel:
    links: tuple[str, ...]
    joints: tuple[Joint, ...]
    base_link: str

    @property
    def actuated_joints(self) -> tuple[Joint, ...]:
        return tuple(j for j in self.joints if j.type != "fixed" and j.mimic_group is None)

    @property
    def mimic_joints(self) -> tuple[Joint, ...]:
        return tuple(j for j in self.joints if j.mimic_group is not None)


@dataclass(frozen=True)
class JointState:
    values: np.ndarray  # one scalar per actuated joint

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class FkResult:
    transforms: dict  # link name -> RigidTransform in the robot canonical frame

    def __getitem__(self, link: str) -> RigidTransform:
        return self.transforms[link]

    def __contains__(self, link: str) -> bool:
        return link in self.transforms


def _parse_vec(text: str, n: int, what: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != n:
        raise KinematicsError(f"{what}: expected {n} comma-separated values, got {len(parts)}")
    return np.array([float(p) for p in parts])


def parse_kinematic_model(text: str) -> KinematicModel:
    links: list[str] = []
    joints: list[dict] = []
    mimics: list[tuple[str, str, float, float]] = []

    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            if tok[0] == "link":
                if len(tok) != 2:
                    raise KinematicsError("link takes exactly one name")
                links.append(tok[1])
            elif tok[0] == "joint":
                if len(tok) < 5:
                    raise KinematicsError("joint needs NAME TYPE PARENT CHILD")
                name, jtype, parent, child = tok[1:5]
                if jtype not in JOINT_TYPES:
                    raise KinematicsError(f"unknown joint type {jtype!r}")
                kw = dict(p.split("=", 1) for p in tok[5:])
                xyz = _parse_vec(kw.get("xyz", "0,0,0"), 3, "xyz")
                rpy = _parse_vec(kw.get("rpy", "0,0,0"), 3, "rpy")
                axis = _parse_vec(kw.get("axis", "0,0,1"), 3, "axis")
                lim = _parse_vec(kw.get("limits", "0,0"), 2, "limits")
                joints.append(
                    dict(name=name, type=jtype, parent=parent, child=child,
                         xyz=xyz, rpy=rpy, axis=axis, limits=lim)
                )
            elif tok[0] == "mimic":
                if len(tok) < 3:
                    raise KinematicsError("mimic needs GROUP JOINT")
                kw = dict(p.split("=", 1) for p in tok[3:])
                mimics.append((tok[1], tok[2], float(kw.get("multiplier", 1)), float(kw.get("offset", 0))))
            else:
                raise KinematicsError(f"unknown directive {tok[0]!r}")
        except KinematicsError as e:
            raise KinematicsError(f"line {ln}: {e}") from None
        except (ValueError, KeyError) as e:
            raise KinematicsError(f"line {ln}: {e}") from None

    if not links:
        raise KinematicsError("no links declared")

    mimic_by_joint = {j: (g, m, o) for g, j, m, o in mimics}
    built: list[Joint] = []
    children: set[str] = set()
    for j in joints:
        for end in (j["parent"], j["child"]):
            if end not in links:
                raise KinematicsError(f"joint {j['name']}: unknown link {end!r}")
        if j["child"] in children:
            raise KinematicsError(f"link {j['child']} has multiple parent joints")
        children.add(j["child"])
        if j["type"] != "fixed":
            n = np.linalg.norm(j["axis"])
            if abs(n - 1.0) > 1e-9:
                raise KinematicsError(f"joint {j['name']}: axis is not unit-norm")
        lo, hi = j["limits"]
        if lo > hi:
            raise KinematicsError(f"joint {j['name']}: limits lo > hi")
        g, m, o = mimic_by_joint.pop(j["name"], (None, 1.0, 0.0))
        origin = RigidTransform(rpy_to_rotation(*j["rpy"]), j["xyz"])
        built.append(
            Joint(j["name"], j["type"], j["parent"], j["child"], origin, j["axis"],
                  (float(lo), float(hi)), g, m, o)
        )
    if mimic_by_joint:
        raise KinematicsError(f"mimic references unknown joints: {sorted(mimic_by_joint)}")

    roots = [l for l in links if l not in children]
    if len(roots) != 1:
        raise KinematicsError(f"joint graph must have exactly one root, found {roots}")
    base = roots[0]

    # reachability walk doubles as cycle detection
    adj: dict[str, list[str]] = {l: [] for l in links}
    for j in built:
        adj[j.parent].append(j.child)
    seen = set()
    stack = [base]
    while stack:
        l = stack.pop()
        if l in seen:
            raise KinematicsError("joint graph contains a cycle")
        seen.add(l)
        stack.extend(adj[l])
    if seen != set(links):
        raise KinematicsError(f"links unreachable from base: {sorted(set(links) - seen)}")

    return KinematicModel(links=tuple(links), joints=tuple(built), base_link=base)


def _motion(joint: Joint, value: float) -> RigidTransform:
    if joint.type == "fixed":
        return RigidTransform.identity()
    if joint.type == "prismatic":
        return RigidTransform(np.eye(3), joint.axis * value)
    # revolute: Rodrigues rotation about the joint axis
    k = joint.axis
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    R = np.eye(3) + np.sin(value) * K + (1 - np.cos(value)) * (K @ K)
    return RigidTransform(R, np.zeros(3))


def forward_kinematics(
    model: KinematicModel,
    q: JointState,
    mimic_values: dict | None = None,
    clamp_limits: bool = False,
) -> FkResult:
    """Per-link world transforms: child = parent o origin o motion(type, axis, q).

    mimic_values supplies joint values for mimic joints by name (defaults to
    their lower limit).  Out-of-limit values raise in strict mode and are
    clamped when clamp_limits is set.
    """
    actuated = model.actuated_joints
    if len(q.values) != len(actuated):
        raise KinematicsError(
            f"joint state has {len(q.values)} values, model has {len(actuated)} actuated joints"
        )
    values: dict[str, float] = {}
    for joint, v in zip(actuated, q.values):
        lo, hi = joint.limits
        if v < lo or v > hi:
            if not clamp_limits:
                raise JointLimitError(
                    f"joint {joint.name}: value {v} outside limits [{lo}, {hi}]"
                )
            v = min(max(v, lo), hi)
        values[joint.name] = float(v)
    for joint in model.mimic_joints:
        values[joint.name] = float((mimic_values or {}).get(joint.name, joint.limits[0]))

    transforms = {model.base_link: RigidTransform.identity()}
    pending = list(model.joints)
    while pending:
        progressed = False
        rest = []
        for joint in pending:
            if joint.parent in transforms:
                motion = _motion(joint, values.get(joint.name, 0.0))
                transforms[joint.child] = compose(
                    transforms[joint.parent], compose(joint.origin, motion)
                )
                progressed = True
            else:
                rest.append(joint)
        pending = rest
        if pending and not progressed:  # unreachable for validated models
            raise KinematicsError("disconnected joint graph")
    return FkResult(transforms=transforms)


def mimic_joint_values(model: KinematicModel, aperture: float) -> dict:
    """Map aperture in [0, 1] to per-joint values across each joint's travel."""
    if not 0.0 <= aperture <= 1.0:
        raise KinematicsError(f"aperture {aperture} outside [0, 1]")
    out = {}
    for joint in model.mimic_joints:
        frac = min(max(joint.mimic_multiplier * aperture + joint.mimic_offset, 0.0), 1.0)
        lo, hi = joint.limits
        out[joint.name] = lo + frac * (hi - lo)
    return out


def gripper_fk(model: KinematicModel, aperture: float, q: JointState | None = None,
               clamp_limits: bool = False) -> FkResult:
    """forward_kinematics with mimic joints driven by a single aperture scalar."""
    if q is None:
        q = JointState(np.zeros(len(model.actuated_joints)))
    return forward_kinematics(model, q, mimic_joint_values(model, aperture), clamp_limits)
