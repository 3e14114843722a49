"""Binary PLY reader/writer for Gaussian-splat point clouds.

The dialect is the de-facto trainer output: binary little-endian, one
"vertex" element with float32 properties

    x y z [nx ny nz] f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3

Opacity is stored as a logit and exposed in [0, 1]; scales are stored as
logs and exposed as positive linear values; quaternions (w, x, y, z) are
normalized on load.  f_rest holds 3*(B-1) higher-order SH coefficients in
channel-major order; B in {1, 4, 9, 16} gives sh_degree 0..3.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

_REQUIRED = (
    ["x", "y", "z", "opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
    + [f"f_dc_{i}" for i in range(3)]
)

_FREST_TO_DEGREE = {0: 0, 9: 1, 24: 2, 45: 3}  # 3*(B-1) for B in {1,4,9,16}


class PlyFormatError(ValueError):
    pass


class EmptySceneError(ValueError):
    pass


@dataclass(frozen=True)
class Gaussian3D:
    """A single 3D Gaussian in exposed (converted) form."""

    mean: np.ndarray        # (3,)
    rotation: np.ndarray    # (4,) unit quaternion, w x y z
    scale: np.ndarray       # (3,) positive linear scales
    opacity: float          # in [0, 1]
    sh: np.ndarray          # (3, B) color coefficients


@dataclass(frozen=True)
class SplatScene:
    """Ordered collection of 3D Gaussians, stored struct-of-arrays.

    Immutable after construction; safe to share read-only across threads.
    """

    means: np.ndarray       # (N, 3)
    rotations: np.ndarray   # (N, 4) unit quaternions, w x y z
    scales: np.ndarray      # (N, 3) positive linear scales
    opacities: np.ndarray   # (N,) in [0, 1]
    sh: np.ndarray          # (N, 3, B)
    sh_degree: int
    source_label: str = ""

    def __post_init__(self):
        n = len(self.means)
        if not (
            len(self.rotations) == len(self.scales) == len(self.opacities) == len(self.sh) == n
        ):
            raise ValueError("field lengths disagree")
        if self.sh.shape[2] != (self.sh_degree + 1) ** 2:
            raise ValueError("sh coefficient count does not match sh_degree")

    def __len__(self) -> int:
        return len(self.means)

    def gaussian(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            mean=self.means[i],
            rotation=self.rotations[i],
            scale=self.scales[i],
            opacity=float(self.opacities[i]),
            sh=self.sh[i],
        )

    def replace(self, **kw) -> "SplatScene":
        args = dict(
            means=self.means,
            rotations=self.rotations,
            scales=self.scales,
            opacities=self.opacities,
            sh=self.sh,
            sh_degree=self.sh_degree,
            source_label=self.source_label,
        )
        args.update(kw)
        return SplatScene(**args)

    @staticmethod
    def from_gaussians(gaussians, sh_degree: int, source_label: str = "") -> "SplatScene":
        return SplatScene(
            means=np.array([g.mean for g in gaussians], dtype=np.float64).reshape(-1, 3),
            rotations=np.array([g.rotation for g in gaussians], dtype=np.float64).reshape(-1, 4),
            scales=np.array([g.scale for g in gaussians], dtype=np.float64).reshape(-1, 3),
            opacities=np.array([g.opacity for g in gaussians], dtype=np.float64),
            sh=np.array([g.sh for g in gaussians], dtype=np.float64),
            sh_degree=sh_degree,
            source_label=source_label,
        )


def _parse_header(stream) -> tuple[list[str], int]:
    line = stream.readline()
    if line.strip() != b"ply":
        raise PlyFormatError("not a PLY file (missing 'ply' magic)")
    if stream.readline().strip() != b"format binary_little_endian 1.0":
        raise PlyFormatError("only binary little-endian PLY is supported")
    props: list[str] = []
    count = None
    in_vertex = False
    while True:
        raw = stream.readline()
        if not raw:
            raise PlyFormatError("unexpected end of header")
        line = raw.decode("ascii").strip()
        if line == "end_header":
            break
        tok = line.split()
        if tok[0] == "comment":
            continue
        if tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                count = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] not in ("float", "float32"):
                raise PlyFormatError(f"property {tok[2]} is not float32")
            props.append(tok[2])
    if count is None:
        raise PlyFormatError("no vertex element")
    return props, count


def parse_splat_ply(data) -> SplatScene:
    """Parse a binary PLY byte stream (bytes or file object) into a SplatScene."""
    stream = io.BytesIO(data) if isinstance(data, (bytes, bytearray)) else data
    props, count = _parse_header(stream)
    if count == 0:
        raise EmptySceneError("PLY contains zero vertices")
    for name in _REQUIRED:
        if name not in props:
            raise PlyFormatError(f"missing required property: {name}")

    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    if n_rest not in _FREST_TO_DEGREE:
        raise PlyFormatError(
            f"f_rest property count {n_rest} does not match any SH degree (expected 0, 9, 24 or 45)"
        )
    sh_degree = _FREST_TO_DEGREE[n_rest]
    basis = (sh_degree + 1) ** 2

    known = set(_REQUIRED) | {f"f_rest_{i}" for i in range(n_rest)} | {"nx", "ny", "nz"}
    for p in props:
        if p not in known:
            log.warning("skipping unknown PLY property %r", p)

    raw = stream.read(4 * len(props) * count)
    if len(raw) != 4 * len(props) * count:
        raise PlyFormatError("truncated vertex data")
    table = np.frombuffer(raw, dtype="<f4").reshape(count, len(props)).astype(np.float64)
    col = {name: table[:, i] for i, name in enumerate(props)}

    means = np.stack([col["x"], col["y"], col["z"]], axis=1)
    quats = np.stack([col[f"rot_{i}"] for i in range(4)], axis=1)
    norms = np.linalg.norm(quats, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise PlyFormatError("zero-norm rotation quaternion")
    quats = quats / norms
    scales = np.exp(np.stack([col[f"scale_{i}"] for i in range(3)], axis=1))
    opacities = 1.0 / (1.0 + np.exp(-col["opacity"]))
    sh = np.zeros((count, 3, basis))
    for c in range(3):
        sh[:, c, 0] = col[f"f_dc_{c}"]
    per_channel = basis - 1
    for c in range(3):
        for b in range(per_channel):
            sh[:, c, 1 + b] = col[f"f_rest_{c * per_channel + b}"]

    return SplatScene(
        means=means,
        rotations=quats,
        scales=scales,
        opacities=opacities,
        sh=sh,
        sh_degree=sh_degree,
    )


def write_splat_ply(scene: SplatScene) -> bytes:
    """Serialize a SplatScene back to the binary PLY layout parse_splat_ply accepts."""
    n = len(scene)
    if n == 0:
        raise EmptySceneError("refusing to write an empty scene")
    basis = (scene.sh_degree + 1) ** 2
    per_channel = basis - 1
    names = (
        ["x", "y", "z"]
        + [f"f_dc_{i}" for i in range(3)]
        + [f"f_rest_{i}" for i in range(3 * per_channel)]
        + ["opacity"]
        + [f"scale_{i}" for i in range(3)]
        + [f"rot_{i}" for i in range(4)]
    )
    table = np.empty((n, len(names)), dtype=np.float64)
    table[:, 0:3] = scene.means
    table[:, 3:6] = scene.sh[:, :, 0]
    for c in range(3):
        for b in range(per_channel):
            table[:, 6 + c * per_channel + b] = scene.sh[:, c, 1 + b]
    off = 6 + 3 * per_channel
    # logit saturates at opacity 0/1; clip so stored values stay finite
    op = np.clip(scene.opacities, 1e-300, 1.0 - 1e-16)
    table[:, off] = np.log(op / (1.0 - op))
    table[:, off + 1 : off + 4] = np.log(scene.scales)
    table[:, off + 4 : off + 8] = scene.rotations

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    out = io.BytesIO()
    out.write(("\n".join(header) + "\n").encode("ascii"))
    out.write(table.astype("<f4").tobytes())
    return out.getvalue()
