"""Template mesh loading, linear blend skinning, and textured export.

Meshes are Wavefront OBJ (triangles with per-corner UV indices);
skinning data lives in a JSON sidecar (joints with parent index, rest
rotation quaternion (w, x, y, z), rest translation, plus per-vertex
sparse joint weights).  See docs/formats.md.

Skinning uses the standard linear blend:

    v' = sum_j w_vj * M_j(pose) * M_j(rest)^-1 * v

with world joint matrices composed down the hierarchy.  Joints whose
pose equals the rest pose bitwise (including every ancestor) get an
exact identity skinning matrix, so reposing with the rest pose returns
the input vertices bit-for-bit.

Reposing follows a three-keyframe scheme: the rest pose is held for a
number of frames, then interpolated to the target (per-joint quaternion
slerp, linear root translation), ending exactly on the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshError, ValidationError
from .imageio import write_png
from .transfer import UvAtlas

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Quaternions (w, x, y, z)

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValidationError("zero quaternion")
    return q / n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation; endpoints are returned bitwise exact."""
    if t <= 0.0:
        return q0.copy()
    if t >= 1.0:
        return q1.copy()
    dot = float(np.dot(q0, q1))
    sign = 1.0
    if dot < 0.0:
        dot, sign = -dot, -1.0
    if dot > 1.0 - 1e-12:
        out = q0 + t * (sign * q1 - q0)
        return out / np.linalg.norm(out)
    theta = np.arccos(dot)
    s = np.sin(theta)
    a = np.sin((1 - t) * theta) / s
    b = np.sin(t * theta) / s
    out = a * q0 + b * sign * q1
    return out / np.linalg.norm(out)


# ---------------------------------------------------------------------------
# Data model


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # -1 for a root
    rest_rotation: np.ndarray  # quaternion (w, x, y, z)
    rest_translation: np.ndarray  # (3,)


@dataclass
class SkinnedMesh:
    vertices: np.ndarray  # (n, 3) rest positions
    faces: np.ndarray  # (m, 3) vertex indices
    uvs: np.ndarray  # (k, 2) in [0, 1]^2
    face_uvs: np.ndarray  # (m, 3) indices into uvs, per corner
    joints: tuple[Joint, ...]
    weights: np.ndarray  # (n, n_joints) dense, rows sum to 1

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)


@dataclass(frozen=True)
class Pose:
    """Per-joint local rotations plus a translation applied to joint 0."""

    rotations: dict[str, np.ndarray]
    root_translation: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        t = np.zeros(3) if self.root_translation is None else np.asarray(
            self.root_translation, dtype=np.float64
        )
        object.__setattr__(self, "root_translation", t)
        object.__setattr__(
            self,
            "rotations",
            {k: np.asarray(v, dtype=np.float64) for k, v in self.rotations.items()},
        )


@dataclass(frozen=True)
class PoseSequence:
    keyframes: tuple[Pose, Pose, Pose]  # rest, rest held, target
    hold_frames: int = 10
    transition_frames: int = 20

    def __post_init__(self):
        if len(self.keyframes) != 3:
            raise ValidationError("pose sequence needs exactly three keyframes")
        if self.hold_frames < 1 or self.transition_frames < 1:
            raise ValidationError("frame counts must be >= 1")
        a, b, _ = self.keyframes
        if set(a.rotations) != set(b.rotations) or any(
            not np.array_equal(a.rotations[k], b.rotations[k]) for k in a.rotations
        ) or not np.array_equal(a.root_translation, b.root_translation):
            raise ValidationError("first two keyframes must be identical")
        for pose in self.keyframes:
            for name, q in pose.rotations.items():
                if abs(np.linalg.norm(q) - 1.0) > 1e-9:
                    raise ValidationError(
                        f"keyframe rotation for joint '{name}' is not unit length"
                    )


def rest_pose(mesh: SkinnedMesh) -> Pose:
    return Pose(rotations={j.name: j.rest_rotation.copy() for j in mesh.joints})


# ---------------------------------------------------------------------------
# Loading


def parse_obj(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parse vertices, uvs, triangle faces and per-corner uv indices."""
    vertices, uvs, faces, face_uvs = [], [], [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "v":
            vertices.append([float(c) for c in parts[1:4]])
        elif tag == "vt":
            uvs.append([float(c) for c in parts[1:3]])
        elif tag == "f":
            corners = parts[1:]
            if len(corners) != 3:
                raise MeshError(f"{path}:{lineno}: only triangle faces are supported")
            vi, ti = [], []
            for c in corners:
                fields = c.split("/")
                vi.append(int(fields[0]) - 1)
                if len(fields) < 2 or fields[1] == "":
                    raise MeshError(
                        f"{path}:{lineno}: missing UVs (face corner '{c}' has no "
                        "texture coordinate index)"
                    )
                ti.append(int(fields[1]) - 1)
            faces.append(vi)
            face_uvs.append(ti)
    if not uvs:
        raise MeshError(f"{path}: missing UVs (no vt records)")
    if not faces:
        raise MeshError(f"{path}: no faces")
    return (
        np.array(vertices, dtype=np.float64),
        np.array(uvs, dtype=np.float64),
        np.array(faces, dtype=np.int64),
        np.array(face_uvs, dtype=np.int64),
    )


def load_mesh(obj_path, skeleton_path) -> SkinnedMesh:
    """Load an OBJ template plus its skeleton/weights sidecar."""
    vertices, uvs, faces, face_uvs = parse_obj(obj_path)
    # OBJ stores v with the origin at the bottom of the texture; atlas
    # coordinates have v growing down, so flip on the way in.
    uvs = uvs.copy()
    uvs[:, 1] = 1.0 - uvs[:, 1]

    try:
        doc = json.loads(Path(skeleton_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MeshError(f"malformed skeleton file: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise MeshError(f"unsupported skeleton format_version {doc.get('format_version')!r}")

    joints = []
    for i, jd in enumerate(doc.get("joints", [])):
        parent = int(jd["parent"])
        if parent >= i or parent < -1:
            raise MeshError(
                f"joint '{jd['name']}' parent index {parent} must be -1 or a "
                "previously declared joint"
            )
        joints.append(
            Joint(
                name=str(jd["name"]),
                parent=parent,
                rest_rotation=quat_normalize(jd.get("rotation", (1, 0, 0, 0))),
                rest_translation=np.asarray(jd.get("translation", (0, 0, 0)),
                                            dtype=np.float64),
            )
        )
    if not joints:
        raise MeshError("skeleton declares no joints")
    if joints[0].parent != -1:
        raise MeshError("joint 0 must be a root")
    names = [j.name for j in joints]
    if len(set(names)) != len(names):
        raise MeshError("duplicate joint names")

    rows = doc.get("weights", [])
    if len(rows) != len(vertices):
        raise MeshError(
            f"weights cover {len(rows)} vertices, mesh has {len(vertices)}"
        )
    weights = np.zeros((len(vertices), len(joints)))
    for vi, row in enumerate(rows):
        for joint_idx, w in row:
            if not 0 <= int(joint_idx) < len(joints):
                raise MeshError(f"vertex {vi} weight references joint {joint_idx}")
            weights[vi, int(joint_idx)] += float(w)
        total = weights[vi].sum()
        if total <= 0:
            raise MeshError(f"unnormalizable weights: vertex {vi} row sums to zero")
        weights[vi] /= total

    mesh = SkinnedMesh(vertices, faces, uvs, face_uvs, tuple(joints), weights)
    _validate_mesh(mesh)
    return mesh


def _validate_mesh(mesh: SkinnedMesh):
    if mesh.faces.size and mesh.faces.max() >= len(mesh.vertices):
        raise MeshError("face index out of range")
    if mesh.face_uvs.size and mesh.face_uvs.max() >= len(mesh.uvs):
        raise MeshError("face uv index out of range")
    if ((mesh.uvs < -1e-9) | (mesh.uvs > 1 + 1e-9)).any():
        raise MeshError("uv coordinates must lie inside the unit square")
    sums = mesh.weights.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise MeshError("vertex weights must sum to 1")


def load_template_mesh(name: str = "tshirt_template") -> SkinnedMesh:
    """Load a template shipped with the package."""
    from importlib import resources

    base = resources.files("garmentuv") / "data" / "meshes"
    obj = base / f"{name}.obj"
    skel = base / f"{name}.skel.json"
    if not obj.is_file():
        raise MeshError(f"no shipped template named '{name}'")
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        op = Path(tmp) / "m.obj"
        sp = Path(tmp) / "m.skel.json"
        op.write_text(obj.read_text(encoding="utf-8"), encoding="utf-8")
        sp.write_text(skel.read_text(encoding="utf-8"), encoding="utf-8")
        return load_mesh(op, sp)


# ---------------------------------------------------------------------------
# Skinning


def _local_matrix(rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = quat_to_matrix(rotation)
    m[:3, 3] = translation
    return m


def _world_matrices(mesh: SkinnedMesh, pose: Pose) -> list[np.ndarray]:
    worlds: list[np.ndarray] = []
    for i, joint in enumerate(mesh.joints):
        t = joint.rest_translation
        if i == 0:
            t = t + pose.root_translation
        local = _local_matrix(pose.rotations[joint.name], t)
        if joint.parent == -1:
            worlds.append(local)
        else:
            worlds.append(worlds[joint.parent] @ local)
    return worlds


def skin(mesh: SkinnedMesh, pose: Pose) -> np.ndarray:
    """Deform rest vertices by the pose; returns (n, 3) positions.

    Vertices influenced only by joints posed identically to rest are
    copied through unchanged (bit-exact).
    """
    missing = set(mesh.joint_names) - set(pose.rotations)
    if missing:
        raise ValidationError(f"pose missing joints {sorted(missing)}")

    at_rest = np.zeros(len(mesh.joints), dtype=bool)
    for i, joint in enumerate(mesh.joints):
        same = np.array_equal(pose.rotations[joint.name], joint.rest_rotation)
        if i == 0:
            same = same and not pose.root_translation.any()
        if joint.parent == -1:
            at_rest[i] = same
        else:
            at_rest[i] = same and at_rest[joint.parent]

    if at_rest.all():
        return mesh.vertices.copy()

    world_pose = _world_matrices(mesh, pose)
    world_rest = _world_matrices(mesh, rest_pose(mesh))
    out = np.zeros_like(mesh.vertices)
    for j in range(len(mesh.joints)):
        w = mesh.weights[:, j]
        active = w > 0
        if not active.any():
            continue
        if at_rest[j]:
            moved = mesh.vertices[active]
        else:
            s = world_pose[j] @ np.linalg.inv(world_rest[j])
            moved = mesh.vertices[active] @ s[:3, :3].T + s[:3, 3]
        out[active] += w[active, None] * moved

    # Vertices whose every influence is at rest short-circuit to the
    # rest position so the identity case stays bit-exact.
    rest_only = (mesh.weights[:, ~at_rest].sum(axis=1) == 0.0)
    out[rest_only] = mesh.vertices[rest_only]
    return out


def pose_frames(mesh: SkinnedMesh, seq: PoseSequence) -> list[Pose]:
    """Expand a three-keyframe sequence into per-frame poses."""
    rest, _, target = seq.keyframes
    frames = [rest] * seq.hold_frames
    n = seq.transition_frames
    for i in range(1, n + 1):
        t = i / n
        if t >= 1.0:
            frames.append(target)
            continue
        rotations = {
            name: quat_slerp(rest.rotations[name], target.rotations[name], t)
            for name in rest.rotations
        }
        trans = rest.root_translation + t * (
            target.root_translation - rest.root_translation
        )
        frames.append(Pose(rotations=rotations, root_translation=trans))
    return frames


# ---------------------------------------------------------------------------
# Export


def export_textured(
    mesh: SkinnedMesh,
    posed_vertices: np.ndarray,
    atlas: UvAtlas,
    directory,
    name: str = "garment",
) -> list[Path]:
    """Write OBJ + MTL + atlas PNG; returns the written paths.

    Refuses atlases with holes inside their panel rectangles ("atlas
    incomplete"); run the inpainting stage first.
    """
    posed_vertices = np.asarray(posed_vertices, dtype=np.float64)
    if posed_vertices.shape != mesh.vertices.shape:
        raise ValidationError(
            f"posed vertices shape {posed_vertices.shape} != mesh "
            f"{mesh.vertices.shape}"
        )
    if atlas.panel_rects:
        for pname, (x0, y0, x1, y1) in atlas.panel_rects.items():
            if not atlas.valid[y0:y1, x0:x1].all():
                raise ValidationError(
                    f"atlas incomplete: panel '{pname}' still has holes"
                )
    elif not atlas.valid.all():
        raise ValidationError("atlas incomplete: validity mask has holes")

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    obj_path = directory / f"{name}.obj"
    mtl_path = directory / f"{name}.mtl"
    png_path = directory / f"{name}.png"

    lines = [f"mtllib {name}.mtl", f"o {name}"]
    for v in posed_vertices:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    for uv in mesh.uvs:
        lines.append(f"vt {uv[0]:.6f} {1.0 - uv[1]:.6f}")  # v back to OBJ-up
    lines.append(f"usemtl {name}_material")
    for face, fuv in zip(mesh.faces, mesh.face_uvs):
        c = " ".join(f"{vi + 1}/{ti + 1}" for vi, ti in zip(face, fuv))
        lines.append(f"f {c}")
    obj_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    mtl_path.write_text(
        "\n".join(
            [
                f"newmtl {name}_material",
                "Ka 1.000 1.000 1.000",
                "Kd 1.000 1.000 1.000",
                "Ks 0.000 0.000 0.000",
                "d 1.0",
                "illum 1",
                f"map_Kd {name}.png",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    write_png(png_path, atlas.pixels)
    return [obj_path, mtl_path, png_path]
