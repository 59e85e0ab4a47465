#!/usr/bin/env python3
"""Generate the shipped tshirt template mesh + skeleton sidecar.

Run from the repo root:

    python tools/gen_tshirt_template.py

Writes src/garmentuv/data/meshes/tshirt_template.{obj,skel.json}.
The UV layout matches the default tshirt schema (front, back, two
sleeves); v is written OBJ-style (origin at texture bottom).
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "garmentuv" / "data" / "meshes"

# Panel UV rects from the default tshirt schema (atlas convention: v down).
RECTS = {
    "front": (0.0, 0.0, 0.5, 0.625),
    "back": (0.5, 0.0, 1.0, 0.625),
    "sleeve_left": (0.0, 0.625, 0.375, 1.0),
    "sleeve_right": (0.4375, 0.625, 0.8125, 1.0),
}
INSET = 0.01


def grid_panel(nx, ny, corner_of, uv_rect, flip_normal=False):
    """Vertices, uvs and faces for an nx x ny grid.

    corner_of(fx, fy) -> (x, y, z) with fy = 0 at the garment bottom.
    UVs map fy = 1 (top) to the rect's v0 (atlas v grows down).
    """
    u0, v0, u1, v1 = uv_rect
    u0, v0, u1, v1 = u0 + INSET, v0 + INSET, u1 - INSET, v1 - INSET
    verts, uvs = [], []
    for j in range(ny):
        for i in range(nx):
            fx, fy = i / (nx - 1), j / (ny - 1)
            verts.append(corner_of(fx, fy))
            u = u0 + fx * (u1 - u0)
            v_atlas = v0 + (1 - fy) * (v1 - v0)
            uvs.append((u, 1.0 - v_atlas))  # atlas v-down -> OBJ v-up
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b = a + 1
            c = a + nx
            d = c + 1
            if flip_normal:
                faces.append((a, c, b))
                faces.append((b, c, d))
            else:
                faces.append((a, b, c))
                faces.append((b, d, c))
    return verts, uvs, faces


def main():
    all_v, all_uv, all_f = [], [], []

    def add(verts, uvs, faces):
        base_v, base_uv = len(all_v), len(all_uv)
        all_v.extend(verts)
        all_uv.extend(uvs)
        all_f.extend(
            tuple((vi + base_v, vi + base_uv) for vi in face) for face in faces
        )

    add(*grid_panel(7, 9, lambda fx, fy: (-0.24 + 0.48 * fx, 0.60 * fy, 0.05),
                    RECTS["front"]))
    add(*grid_panel(7, 9, lambda fx, fy: (-0.24 + 0.48 * fx, 0.60 * fy, -0.05),
                    RECTS["back"], flip_normal=True))
    add(*grid_panel(5, 4, lambda fx, fy: (-0.45 + 0.21 * fx, 0.38 + 0.20 * fy, 0.05),
                    RECTS["sleeve_left"]))
    add(*grid_panel(5, 4, lambda fx, fy: (0.24 + 0.21 * fx, 0.38 + 0.20 * fy, 0.05),
                    RECTS["sleeve_right"]))

    joints = [
        {"name": "root", "parent": -1, "rotation": [1, 0, 0, 0],
         "translation": [0.0, 0.0, 0.0]},
        {"name": "chest", "parent": 0, "rotation": [1, 0, 0, 0],
         "translation": [0.0, 0.35, 0.0]},
        {"name": "shoulder_l", "parent": 1, "rotation": [1, 0, 0, 0],
         "translation": [-0.20, 0.18, 0.0]},
        {"name": "elbow_l", "parent": 2, "rotation": [1, 0, 0, 0],
         "translation": [-0.18, 0.0, 0.0]},
        {"name": "shoulder_r", "parent": 1, "rotation": [1, 0, 0, 0],
         "translation": [0.20, 0.18, 0.0]},
        {"name": "elbow_r", "parent": 4, "rotation": [1, 0, 0, 0],
         "translation": [0.18, 0.0, 0.0]},
    ]

    def weight_row(x, y, z):
        if abs(x) > 0.24:  # sleeve vertex
            t = min(max((abs(x) - 0.26) / 0.14, 0.0), 1.0)
            shoulder, elbow = (2, 3) if x < 0 else (4, 5)
            if t == 0.0:
                return [[shoulder, 1.0]]
            if t == 1.0:
                return [[elbow, 1.0]]
            return [[shoulder, round(1.0 - t, 6)], [elbow, round(t, 6)]]
        t = min(max((y - 0.15) / 0.30, 0.0), 1.0)
        if t == 0.0:
            return [[0, 1.0]]
        if t == 1.0:
            return [[1, 1.0]]
        return [[0, round(1.0 - t, 6)], [1, round(t, 6)]]

    weights = [weight_row(*v) for v in all_v]

    OUT.mkdir(parents=True, exist_ok=True)
    obj_lines = ["# tshirt template: front/back planes + sleeve flaps",
                 "o tshirt_template"]
    for x, y, z in all_v:
        obj_lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
    for u, v in all_uv:
        obj_lines.append(f"vt {u:.6f} {v:.6f}")
    for face in all_f:
        obj_lines.append(
            "f " + " ".join(f"{vi + 1}/{ti + 1}" for vi, ti in face)
        )
    (OUT / "tshirt_template.obj").write_text("\n".join(obj_lines) + "\n")
    (OUT / "tshirt_template.skel.json").write_text(
        json.dumps(
            {"format_version": 1, "joints": joints, "weights": weights}, indent=1
        )
        + "\n"
    )
    print(f"wrote {len(all_v)} vertices, {len(all_f)} faces, {len(joints)} joints")


if __name__ == "__main__":
    main()
