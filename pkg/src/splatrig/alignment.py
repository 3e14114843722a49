"""Point-cloud registration: trimmed point-to-point ICP with optional
uniform scale estimation (Umeyama), used to recover the splat-to-robot
transform and per-object alignment transforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import RigidTransform, compose
from .splat_io import SplatScene


class DegenerateGeometryError(ValueError):
    pass


class NoOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 100
    convergence_tol: float = 1e-6       # meters, residual delta
    max_correspondence_dist: float = 0.05  # meters
    estimate_scale: bool = False
    trim_fraction: float = 0.1

    def __post_init__(self):
        if self.max_iterations <= 0 or self.convergence_tol <= 0 or self.max_correspondence_dist <= 0:
            raise ValueError("ICP parameters must be positive")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ValueError("trim_fraction must be in [0, 0.5)")


@dataclass(frozen=True)
class AlignmentResult:
    transform: RigidTransform
    scale: float
    rms_residual: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "rotation": self.transform.rotation.tolist(),
            "translation": self.transform.translation.tolist(),
            "scale": self.scale,
            "rms_residual": self.rms_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @staticmethod
    def from_dict(d: dict) -> "AlignmentResult":
        return AlignmentResult(
            transform=RigidTransform(np.array(d["rotation"]), np.array(d["translation"])),
            scale=float(d["scale"]),
            rms_residual=float(d["rms_residual"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
        )


def best_fit_transform(source_pts, target_pts, estimate_scale: bool = False):
    """Closed-form least-squares fit q_i ~ s R p_i + t (Umeyama).

    Returns (RigidTransform, scale); scale is 1.0 unless estimate_scale.
    det(R) = +1 is enforced via reflection correction.
    """
    P = np.asarray(source_pts, dtype=np.float64)
    Q = np.asarray(target_pts, dtype=np.float64)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[1] != 3:
        raise ValueError("source and target must be equally sized (N, 3) arrays")
    if len(P) < 3:
        raise DegenerateGeometryError("need at least 3 point pairs")

    mu_p = P.mean(axis=0)
    mu_q = Q.mean(axis=0)
    Pc = P - mu_p
    Qc = Q - mu_q
    H = Pc.T @ Qc / len(P)
    U, S, Vt = np.linalg.svd(H)
    if S[1] < 1e-12 * max(S[0], 1e-300):
        raise DegenerateGeometryError("point configuration is collinear or rank-deficient")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    if estimate_scale:
        var_p = (Pc ** 2).sum() / len(P)
        s = float((S * np.diag(D)).sum() / var_p)
        if s <= 0:
            raise DegenerateGeometryError("non-positive estimated scale")
    else:
        s = 1.0
    t = mu_q - s * (R @ mu_p)
    return RigidTransform(R, t), s


def icp_align(source, target, init: RigidTransform | None = None, params: IcpParams | None = None) -> AlignmentResult:
    """Trimmed point-to-point ICP mapping source into the target frame.

    Each iteration gates correspondences by max_correspondence_dist, trims
    the worst trim_fraction, and re-solves the (optionally similarity)
    closed-form fit on all gated pairs.
    """
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if len(src) < 3 or len(tgt) < 3:
        raise DegenerateGeometryError("both point sets need at least 3 points")
    init = init or RigidTransform.identity()
    params = params or IcpParams()

    tree = cKDTree(tgt)
    R = init.rotation.copy()
    t = init.translation.copy()
    s = 1.0
    if params.estimate_scale:
        # seed the scale from the centered RMS-radius ratio; starting at 1
        # routinely traps similarity ICP in local minima for shrunk sources
        src_rms = float(np.sqrt(np.mean(np.sum((src - src.mean(axis=0)) ** 2, axis=1))))
        tgt_rms = float(np.sqrt(np.mean(np.sum((tgt - tgt.mean(axis=0)) ** 2, axis=1))))
        if src_rms > 0 and tgt_rms > 0:
            s = tgt_rms / src_rms
    prev_rms = np.inf
    rms = np.inf
    converged = False
    it = 0
    for it in range(1, params.max_iterations + 1):
        moved = s * (src @ R.T) + t
        dist, idx = tree.query(moved, k=1)
        keep = dist <= params.max_correspondence_dist
        if not np.any(keep):
            raise NoOverlapError(
                f"no correspondences within gate {params.max_correspondence_dist} at iteration {it}"
            )
        kept_src = src[keep]
        kept_tgt = tgt[idx[keep]]
        kept_dist = dist[keep]
        if params.trim_fraction > 0 and len(kept_dist) > 3:
            n_keep = max(3, int(np.ceil(len(kept_dist) * (1.0 - params.trim_fraction))))
            order = np.argsort(kept_dist, kind="stable")[:n_keep]
            kept_src = kept_src[order]
            kept_tgt = kept_tgt[order]
            kept_dist = kept_dist[order]
        T_step, s_step = best_fit_transform(kept_src, kept_tgt, params.estimate_scale)
        R = T_step.rotation
        t = T_step.translation
        s = s_step
        moved = s * (kept_src @ R.T) + t
        rms = float(np.sqrt(np.mean(np.sum((moved - kept_tgt) ** 2, axis=1))))
        if abs(prev_rms - rms) < params.convergence_tol:
            converged = True
            break
        prev_rms = rms

    return AlignmentResult(
        transform=RigidTransform(R, t),
        scale=s,
        rms_residual=rms,
        iterations=it,
        converged=converged,
    )


def crop_points(points: np.ndarray, box_min, box_max) -> np.ndarray:
    lo = np.asarray(box_min, dtype=np.float64)
    hi = np.asarray(box_max, dtype=np.float64)
    mask = np.all((points >= lo) & (points <= hi), axis=1)
    return mask


def align_scene_to_robot(
    scene: SplatScene,
    robot_reference_pts,
    crop: tuple,
    init: RigidTransform | None = None,
    params: IcpParams | None = None,
) -> AlignmentResult:
    """Register cropped splat means against simulator robot surface points.

    crop is an axis-aligned (min, max) box in the splat frame standing in
    for manual robot segmentation.  When params.estimate_scale is set, the
    returned scale should be baked into the scene exactly once via
    rescale_scene.
    """
    mask = crop_points(scene.means, crop[0], crop[1])
    n = int(mask.sum())
    if n == 0:
        raise ValueError("crop box selects no splat means")
    if n < 3:
        raise DegenerateGeometryError(f"crop box selects only {n} points; need at least 3")
    return icp_align(scene.means[mask], np.asarray(robot_reference_pts, dtype=np.float64), init, params)


def rescale_scene(scene: SplatScene, s: float) -> SplatScene:
    """Uniformly rescale means and linear scales; everything else unchanged."""
    if s <= 0:
        raise ValueError("scale must be positive")
    return scene.replace(means=scene.means * s, scales=scene.scales * s)


def load_xyz_points(text: str) -> np.ndarray:
    """Parse whitespace-separated 'x y z' lines into an (N, 3) array."""
    rows = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {ln}: expected 3 values, got {len(parts)}")
        rows.append([float(v) for v in parts])
    return np.array(rows, dtype=np.float64).reshape(-1, 3)
