"""SE(3) transform algebra and rigid transformation of 3D Gaussians.

A rigid transform T = (R, t) acts on a Gaussian by mapping its mean to
R @ mean + t and its covariance to R @ Sigma @ R^T.  Covariances are never
materialized during rigging: since Sigma = Rg diag(s)^2 Rg^T, the covariance
update is realized by left-multiplying the stored quaternion, leaving the
scales untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


def quat_to_rotation(q) -> np.ndarray:
    """Convert a unit quaternion (w, x, y, z) to a 3x3 rotation matrix.

    Raises GeometryError if |q| deviates from 1 by more than 1e-6.
    """
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > 1e-6:
        raise GeometryError(f"quaternion norm {n:.8f} is not 1 within 1e-6")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
            q = np.array(
                [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
            )
        elif i == 1:
            s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
            q = np.array(
                [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
            )
        else:
            s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
            q = np.array(
                [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
            )
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a * b of two (w, x, y, z) quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def rpy_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Extrinsic x-y-z (roll, pitch, yaw) Euler angles to a rotation matrix."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) element: rotation matrix plus translation, in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise GeometryError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise GeometryError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_quat(q, t=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(quat_to_rotation(q), np.asarray(t, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to one 3-vector or an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def quat(self) -> np.ndarray:
        return rotation_to_quat(self.rotation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """(a o b)(x) = a(b(x))."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(T: RigidTransform) -> RigidTransform:
    return RigidTransform(T.rotation.T, -T.rotation.T @ T.translation)


@dataclass(frozen=True)
class Covariance3:
    """3x3 symmetric positive semi-definite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=np.float64)
        if not np.allclose(M, M.T, atol=1e-9):
            raise GeometryError("covariance is not symmetric within 1e-9")
        if np.linalg.eigvalsh(M).min() < -1e-12:
            raise GeometryError("covariance has negative eigenvalues")
        object.__setattr__(self, "matrix", M)


def build_covariance(scale, q) -> Covariance3:
    """Sigma = R diag(scale)^2 R^T for positive linear scales and unit quaternion q."""
    s = np.asarray(scale, dtype=np.float64)
    if np.any(s <= 0):
        raise GeometryError("scales must be strictly positive")
    R = quat_to_rotation(q)
    return Covariance3(R @ np.diag(s * s) @ R.T)


def transform_gaussian(g, T: RigidTransform):
    """Transform a Gaussian rigidly: mean' = R mean + t, Sigma' = R Sigma R^T.

    The covariance update is applied by quaternion composition; scales,
    opacity and SH coefficients pass through unchanged.
    """
    from .splat_io import Gaussian3D  # local import to avoid a cycle

    q_new = quat_multiply(T.quat(), g.rotation)
    q_new = q_new / np.linalg.norm(q_new)
    return Gaussian3D(
        mean=T.apply(g.mean),
        rotation=q_new,
        scale=np.array(g.scale, copy=True),
        opacity=g.opacity,
        sh=np.array(g.sh, copy=True),
    )


def transform_means_quats(means: np.ndarray, quats: np.ndarray, T: RigidTransform):
    """Vectorized rigid transform of (N, 3) means and (N, 4) wxyz quaternions."""
    means_out = means @ T.rotation.T + T.translation
    a = T.quat()
    aw, ax, ay, az = a
    bw, bx, by, bz = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    quats_out = np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=1,
    )
    quats_out /= np.linalg.norm(quats_out, axis=1, keepdims=True)
    return means_out, quats_out
