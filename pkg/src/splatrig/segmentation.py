"""Assign each Gaussian to a rigid body: robot links via per-link CAD
bounding boxes, articulated gripper links via a KNN classifier trained on
labeled simulator point clouds, everything else static.

Labels are integers: STATIC (-1) or a link index in [0, link_count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, invert
from .splat_io import SplatScene

STATIC = -1


@dataclass(frozen=True)
class LinkAssignment:
    labels: np.ndarray  # (N,) int32, STATIC or link index
    link_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32)
        if labels.ndim != 1:
            raise ValueError("labels must be 1-D")
        if np.any((labels < STATIC) | (labels >= self.link_count)):
            raise ValueError("labels out of range")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class KnnModel:
    training_points: np.ndarray  # (M, 3) robot canonical frame
    training_labels: np.ndarray  # (M,) int
    k: int

    def __post_init__(self):
        pts = np.asarray(self.training_points, dtype=np.float64).reshape(-1, 3)
        lab = np.asarray(self.training_labels, dtype=np.int32)
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError("k must be a positive odd number")
        if len(pts) != len(lab):
            raise ValueError("points and labels disagree in length")
        if len(pts) < self.k:
            raise ValueError(f"need at least k={self.k} training points, got {len(pts)}")
        if len(np.unique(lab)) < 2:
            raise ValueError("need at least 2 distinct labels")
        object.__setattr__(self, "training_points", pts)
        object.__setattr__(self, "training_labels", lab)


def _in_box(points: np.ndarray, box) -> np.ndarray:
    lo = np.asarray(box[0], dtype=np.float64)
    hi = np.asarray(box[1], dtype=np.float64)
    if np.any(lo >= hi):
        raise ValueError("box must satisfy min < max per axis")
    return np.all((points >= lo) & (points <= hi), axis=1)


def segment_by_aabb(scene: SplatScene, boxes, fk_home, T_align: RigidTransform) -> LinkAssignment:
    """Label Gaussians by per-link axis-aligned boxes in link-local frames.

    boxes[l] = (min, max) in link l's local frame; fk_home[l] is link l's
    robot-frame pose at the segmentation pose; T_align maps splat-frame
    means into the robot frame.  Overlaps resolve to the lowest link index;
    Gaussians inside no box are STATIC.
    """
    if len(boxes) == 0:
        raise ValueError("no boxes given")
    robot_means = T_align.apply(scene.means)
    labels = np.full(len(scene), STATIC, dtype=np.int32)
    for l in reversed(range(len(boxes))):  # lowest index wins on overlap
        local = invert(fk_home[l]).apply(robot_means)
        labels[_in_box(local, boxes[l])] = l
    return LinkAssignment(labels=labels, link_count=len(boxes))


def train_knn(labeled_points, labels, k: int = 5) -> KnnModel:
    """Store labeled points verbatim (lazy learner)."""
    return KnnModel(training_points=labeled_points, training_labels=labels, k=k)


def knn_predict(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Majority vote over the k nearest training points per query.

    Deterministic: neighbors are ordered by (distance, training index) and
    vote ties resolve to the lowest label.
    """
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(queries), dtype=np.int32)
    pts = model.training_points
    lab = model.training_labels
    chunk = 2048
    for start in range(0, len(queries), chunk):
        q = queries[start : start + chunk]
        d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        for i in range(len(q)):
            order = np.lexsort((np.arange(len(pts)), d2[i]))[: model.k]
            votes = np.bincount(lab[order])
            out[start + i] = int(np.argmax(votes))  # argmax ties -> lowest label
    return out


def classify_links(
    model: KnnModel, scene: SplatScene, T_align: RigidTransform, region, base: LinkAssignment | None = None
) -> LinkAssignment:
    """KNN-label the Gaussians whose robot-frame means fall inside region.

    Out-of-region Gaussians keep their base label (STATIC when no base is
    given).
    """
    robot_means = T_align.apply(scene.means)
    mask = _in_box(robot_means, region)
    if not np.any(mask):
        raise ValueError("region selects no Gaussians")
    link_count = int(model.training_labels.max()) + 1
    if base is not None:
        labels = base.labels.copy()
        link_count = max(link_count, base.link_count)
    else:
        labels = np.full(len(scene), STATIC, dtype=np.int32)
    labels[mask] = knn_predict(model, robot_means[mask])
    return LinkAssignment(labels=labels, link_count=link_count)


def merge_assignments(
    base: LinkAssignment,
    override: LinkAssignment,
    scene: SplatScene,
    region,
    T_align: RigidTransform | None = None,
) -> LinkAssignment:
    """Take labels from override inside the robot-frame region, base elsewhere."""
    if len(base) != len(override):
        raise ValueError("assignment lengths disagree")
    means = scene.means if T_align is None else T_align.apply(scene.means)
    lo = np.asarray(region[0], dtype=np.float64)
    hi = np.asarray(region[1], dtype=np.float64)
    mask = np.all((means >= lo) & (means <= hi), axis=1)
    labels = np.where(mask, override.labels, base.labels)
    return LinkAssignment(labels=labels, link_count=max(base.link_count, override.link_count))


def load_labeled_points(text: str):
    """Parse 'x y z label' lines into ((N, 3) points, (N,) int labels)."""
    pts, labs = [], []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {ln}: expected 'x y z label'")
        pts.append([float(v) for v in parts[:3]])
        labs.append(int(parts[3]))
    return np.array(pts, dtype=np.float64).reshape(-1, 3), np.array(labs, dtype=np.int32)


def save_assignment(assignment: LinkAssignment, path) -> None:
    """Persist labels as a small binary: magic, link_count, count, int32 labels."""
    with open(path, "wb") as f:
        f.write(b"SRLA")
        np.array([assignment.link_count, len(assignment)], dtype="<i4").tofile(f)
        assignment.labels.astype("<i4").tofile(f)


def load_assignment(path) -> LinkAssignment:
    with open(path, "rb") as f:
        if f.read(4) != b"SRLA":
            raise ValueError(f"{path}: not an assignment file")
        link_count, n = np.fromfile(f, dtype="<i4", count=2)
        labels = np.fromfile(f, dtype="<i4", count=int(n))
    if len(labels) != n:
        raise ValueError(f"{path}: truncated assignment file")
    return LinkAssignment(labels=labels, link_count=int(link_count))
