"""Simulator trajectory log ingestion.

One state per line:

    t=<int> q=<f,...,f> grip=<f> obj:<name>=<px,py,pz,qw,qx,qy,qz> ... act=<px,py,pz,qw,qx,qy,qz>

Timesteps must be strictly increasing and every state must carry the same
object set.  Action and object quaternions are renormalized when their norm
is within 1e-3 of 1 and rejected otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rigging import ObjectPose


class TrajectoryFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryState:
    t: int
    q: np.ndarray                # joint values
    aperture: float              # gripper aperture in [0, 1]
    object_poses: dict           # name -> ObjectPose
    action_position: np.ndarray  # (3,) end-effector position, meters
    action_orientation: np.ndarray  # (4,) unit quaternion, w x y z


@dataclass(frozen=True)
class TrajectoryLog:
    states: tuple
    object_ids: tuple
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)


def _checked_quat(vals, what: str, ln: int) -> np.ndarray:
    q = np.asarray(vals, dtype=np.float64)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > 1e-3:
        raise TrajectoryFormatError(f"line {ln}: {what} quaternion norm {n:.6f} off by >1e-3")
    return q / n


def _floats(text: str, ln: int) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise TrajectoryFormatError(f"line {ln}: malformed number in {text!r}") from None


def load_trajectory(text: str) -> TrajectoryLog:
    states = []
    object_ids: tuple | None = None
    last_t = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = {}
        objects = {}
        for token in line.split():
            if "=" not in token:
                raise TrajectoryFormatError(f"line {ln}: malformed token {token!r}")
            key, val = token.split("=", 1)
            if key.startswith("obj:"):
                objects[key[4:]] = val
            else:
                if key in fields:
                    raise TrajectoryFormatError(f"line {ln}: duplicate field {key!r}")
                fields[key] = val
        for req in ("t", "q", "grip", "act"):
            if req not in fields:
                raise TrajectoryFormatError(f"line {ln}: missing field {req!r}")
        try:
            t = int(fields["t"])
        except ValueError:
            raise TrajectoryFormatError(f"line {ln}: bad timestep {fields['t']!r}") from None
        if last_t is not None and t <= last_t:
            raise TrajectoryFormatError(f"line {ln}: timestep {t} not strictly increasing")
        last_t = t

        q = np.asarray(_floats(fields["q"], ln), dtype=np.float64)
        grip = float(fields["grip"])
        if not 0.0 <= grip <= 1.0:
            raise TrajectoryFormatError(f"line {ln}: grip {grip} outside [0, 1]")

        act = _floats(fields["act"], ln)
        if len(act) != 7:
            raise TrajectoryFormatError(f"line {ln}: act needs 7 values, got {len(act)}")

        poses = {}
        for name, val in objects.items():
            vals = _floats(val, ln)
            if len(vals) != 7:
                raise TrajectoryFormatError(f"line {ln}: obj:{name} needs 7 values")
            poses[name] = ObjectPose(vals[:3], _checked_quat(vals[3:], f"obj:{name}", ln))

        ids = tuple(sorted(poses))
        if object_ids is None:
            object_ids = ids
        elif ids != object_ids:
            raise TrajectoryFormatError(
                f"line {ln}: object set {list(ids)} differs from {list(object_ids)}"
            )

        states.append(
            TrajectoryState(
                t=t,
                q=q,
                aperture=grip,
                object_poses=poses,
                action_position=np.asarray(act[:3], dtype=np.float64),
                action_orientation=_checked_quat(act[3:], "act", ln),
            )
        )
    if not states:
        raise TrajectoryFormatError("trajectory contains no states")
    return TrajectoryLog(states=tuple(states), object_ids=object_ids or ())
