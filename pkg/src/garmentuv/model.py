"""Garment data model: schemas, panels, annotations, segmentation masks.

A garment schema is declarative data, not code: it names the landmark
set, lays panels out in the unit-square atlas, and pins each direct
panel's landmarks to fixed positions inside its rectangle.  Schemas and
annotations travel as versioned JSON documents (see docs/formats.md).

Atlas coordinates use image convention: u grows right, v grows DOWN,
and pixel (x, y) covers the unit square cell centred at (x+0.5, y+0.5).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import AnnotationError, InsufficientLandmarksError, MaskError, SchemaError
from .tps import ControlPairs

FORMAT_VERSION = 1

FILL_DIRECT = "direct"
FILL_BACK = "back_fill"
FILL_MIRROR = "mirror_fill"
_FILL_ROLES = (FILL_DIRECT, FILL_BACK, FILL_MIRROR)

# Expected landmark counts for the stock garment kinds.
_LANDMARK_COUNTS = {"tshirt": 14, "trousers": 8}

MASK_BACKGROUND = 0
MASK_OCCLUDER = 128
MASK_GARMENT = 255


@dataclass(frozen=True)
class Anchor:
    """One landmark pinned to a fixed (u, v) spot inside a panel."""

    landmark: int
    u: float
    v: float


@dataclass(frozen=True)
class Panel:
    name: str
    uv_rect: tuple[float, float, float, float]  # (u0, v0, u1, v1), v down
    fill_role: str
    anchors: tuple[Anchor, ...] = ()
    mirror_of: str | None = None

    def pixel_rect(self, atlas_size: tuple[int, int]) -> tuple[int, int, int, int]:
        """Panel extent in atlas pixels: (x0, y0, x1, y1), half-open."""
        w, h = atlas_size
        u0, v0, u1, v1 = self.uv_rect
        return (
            int(round(u0 * w)),
            int(round(v0 * h)),
            int(round(u1 * w)),
            int(round(v1 * h)),
        )

    def pixel_size(self, atlas_size: tuple[int, int]) -> tuple[int, int]:
        x0, y0, x1, y1 = self.pixel_rect(atlas_size)
        return (x1 - x0, y1 - y0)


@dataclass(frozen=True)
class GarmentSchema:
    garment_kind: str
    landmark_names: tuple[str, ...]
    atlas_size: tuple[int, int]
    panels: tuple[Panel, ...]

    def landmark_id(self, name: str) -> int:
        try:
            return self.landmark_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown landmark name '{name}'") from None

    def panel(self, name: str) -> Panel:
        for p in self.panels:
            if p.name == name:
                return p
        raise SchemaError(f"unknown panel '{name}'")

    @property
    def direct_panels(self) -> tuple[Panel, ...]:
        return tuple(p for p in self.panels if p.fill_role == FILL_DIRECT)

    def with_atlas_size(self, atlas_size: tuple[int, int]) -> "GarmentSchema":
        return replace(self, atlas_size=(int(atlas_size[0]), int(atlas_size[1])))


@dataclass(frozen=True)
class LandmarkPoint:
    id: int
    x: float
    y: float
    visible: bool


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    image_size: tuple[int, int]
    garment_kind: str
    landmarks: tuple[LandmarkPoint, ...]

    def point(self, landmark_id: int) -> LandmarkPoint:
        for lm in self.landmarks:
            if lm.id == landmark_id:
                return lm
        raise AnnotationError(f"missing landmark id {landmark_id}")


@dataclass(frozen=True)
class SegMask:
    """Per-pixel class labels: 0 background, 128 occluder, 255 garment."""

    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        a = np.asarray(self.labels, dtype=np.uint8)
        if a.ndim != 2:
            raise MaskError(f"mask must be single-channel, got shape {a.shape}")
        bad = ~np.isin(a, (MASK_BACKGROUND, MASK_OCCLUDER, MASK_GARMENT))
        if bad.any():
            values = sorted(int(v) for v in np.unique(a[bad]))
            raise MaskError(f"mask contains unknown label values {values}")
        object.__setattr__(self, "labels", a)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def full_garment(cls, size: tuple[int, int]) -> "SegMask":
        w, h = size
        return cls(np.full((h, w), MASK_GARMENT, dtype=np.uint8))


def _rects_overlap(a, b) -> bool:
    # Shared edges are fine; only interior overlap is an error.
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _validate_schema(schema: GarmentSchema) -> GarmentSchema:
    names = schema.landmark_names
    if len(set(names)) != len(names):
        raise SchemaError("landmark names must be unique")
    expected = _LANDMARK_COUNTS.get(schema.garment_kind)
    if expected is not None and len(names) != expected:
        raise SchemaError(
            f"{schema.garment_kind} schema must declare exactly {expected} "
            f"landmarks, got {len(names)}"
        )
    w, h = schema.atlas_size
    if w <= 0 or h <= 0:
        raise SchemaError(f"atlas size must be positive, got {schema.atlas_size}")

    panel_names = [p.name for p in schema.panels]
    if len(set(panel_names)) != len(panel_names):
        raise SchemaError("panel names must be unique")

    for p in schema.panels:
        u0, v0, u1, v1 = p.uv_rect
        if not (0.0 <= u0 < u1 <= 1.0 and 0.0 <= v0 < v1 <= 1.0):
            raise SchemaError(
                f"panel '{p.name}' uv_rect {p.uv_rect} must be an ordered "
                "rectangle inside the unit square"
            )
        if p.fill_role not in _FILL_ROLES:
            raise SchemaError(f"panel '{p.name}' has unknown fill_role '{p.fill_role}'")
        if p.fill_role == FILL_MIRROR:
            if p.mirror_of is None or p.mirror_of not in panel_names:
                raise SchemaError(
                    f"mirror panel '{p.name}' must reference an existing panel"
                )
            if p.mirror_of == p.name:
                raise SchemaError(f"panel '{p.name}' cannot mirror itself")
        elif p.mirror_of is not None:
            raise SchemaError(
                f"panel '{p.name}' sets mirror_of but fill_role is not mirror_fill"
            )
        if p.fill_role == FILL_DIRECT and len(p.anchors) < 3:
            raise SchemaError(
                f"direct panel '{p.name}' needs at least 3 anchors, "
                f"got {len(p.anchors)}"
            )
        for a in p.anchors:
            if not 0 <= a.landmark < len(names):
                raise SchemaError(
                    f"panel '{p.name}' anchor references landmark id {a.landmark} "
                    f"outside 0..{len(names) - 1}"
                )
            if not (u0 <= a.u <= u1 and v0 <= a.v <= v1):
                raise SchemaError(
                    f"panel '{p.name}' anchor '{names[a.landmark]}' at "
                    f"({a.u}, {a.v}) lies outside uv_rect {p.uv_rect}"
                )
        if len({a.landmark for a in p.anchors}) != len(p.anchors):
            raise SchemaError(f"panel '{p.name}' anchors a landmark twice")

    for i, a in enumerate(schema.panels):
        for b in schema.panels[i + 1 :]:
            if _rects_overlap(a.uv_rect, b.uv_rect):
                raise SchemaError(f"overlapping panels '{a.name}' and '{b.name}'")
    return schema


def _load_json(source) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object")
    return doc


def _require(doc: dict, field: str, err):
    if field not in doc:
        raise err(f"missing field '{field}'")
    return doc[field]


def load_schema(source) -> GarmentSchema:
    """Load and validate a schema document (path, file object, or dict)."""
    doc = _load_json(source)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version!r}")
    names = tuple(_require(doc, "landmark_names", SchemaError))
    kind = str(_require(doc, "garment_kind", SchemaError))
    expected = _LANDMARK_COUNTS.get(kind)
    if expected is not None and len(names) != expected:
        raise SchemaError(
            f"{kind} schema must declare exactly {expected} landmarks, "
            f"got {len(names)}"
        )
    atlas = _require(doc, "atlas_size", SchemaError)
    try:
        atlas_size = (int(atlas["w"]), int(atlas["h"]))
    except (TypeError, KeyError) as exc:
        raise SchemaError("atlas_size must be an object with fields w, h") from exc

    panels = []
    for pd in _require(doc, "panels", SchemaError):
        anchors = []
        for ad in pd.get("anchors", []):
            lm = ad.get("landmark")
            if isinstance(lm, str):
                if lm not in names:
                    raise SchemaError(f"anchor references unknown landmark '{lm}'")
                lm = names.index(lm)
            anchors.append(Anchor(landmark=int(lm), u=float(ad["u"]), v=float(ad["v"])))
        try:
            panels.append(
                Panel(
                    name=str(pd["name"]),
                    uv_rect=tuple(float(c) for c in pd["uv_rect"]),
                    fill_role=str(pd["fill_role"]),
                    anchors=tuple(anchors),
                    mirror_of=pd.get("mirror_of"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"panel missing field {exc}") from exc

    schema = GarmentSchema(
        garment_kind=kind,
        landmark_names=names,
        atlas_size=atlas_size,
        panels=tuple(panels),
    )
    return _validate_schema(schema)


def schema_to_doc(schema: GarmentSchema) -> dict:
    """Inverse of load_schema; landmark references are written by name."""
    return {
        "format_version": FORMAT_VERSION,
        "garment_kind": schema.garment_kind,
        "landmark_names": list(schema.landmark_names),
        "atlas_size": {"w": schema.atlas_size[0], "h": schema.atlas_size[1]},
        "panels": [
            {
                "name": p.name,
                "uv_rect": list(p.uv_rect),
                "fill_role": p.fill_role,
                **({"mirror_of": p.mirror_of} if p.mirror_of else {}),
                "anchors": [
                    {
                        "landmark": schema.landmark_names[a.landmark],
                        "u": a.u,
                        "v": a.v,
                    }
                    for a in p.anchors
                ],
            }
            for p in schema.panels
        ],
    }


def save_schema(schema: GarmentSchema, path) -> None:
    Path(path).write_text(
        json.dumps(schema_to_doc(schema), indent=2) + "\n", encoding="utf-8"
    )


def load_default_schema(garment_kind: str) -> GarmentSchema:
    """Load one of the schemas shipped with the package."""
    ref = resources.files("garmentuv") / "data" / "schemas" / f"{garment_kind}.json"
    if not ref.is_file():
        raise SchemaError(f"no default schema for garment kind '{garment_kind}'")
    return load_schema(json.loads(ref.read_text(encoding="utf-8")))


def load_annotations(source, schema: GarmentSchema) -> AnnotationSet:
    """Load an annotation document and validate it against ``schema``."""
    doc = _load_json(source)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise AnnotationError(f"unsupported format_version {version!r}")
    size = _require(doc, "image_size", AnnotationError)
    if not (isinstance(size, (list, tuple)) and len(size) == 2):
        raise AnnotationError("image_size must be [width, height]")
    width, height = int(size[0]), int(size[1])

    points = []
    for ld in _require(doc, "landmarks", AnnotationError):
        try:
            points.append(
                LandmarkPoint(
                    id=int(ld["id"]),
                    x=float(ld["x"]),
                    y=float(ld["y"]),
                    visible=bool(ld["visible"]),
                )
            )
        except KeyError as exc:
            raise AnnotationError(f"landmark entry missing field {exc}") from exc

    ann = AnnotationSet(
        image_id=str(_require(doc, "image_id", AnnotationError)),
        image_size=(width, height),
        garment_kind=str(_require(doc, "garment_kind", AnnotationError)),
        landmarks=tuple(points),
    )
    return validate_annotations(ann, schema)


def validate_annotations(ann: AnnotationSet, schema: GarmentSchema) -> AnnotationSet:
    ids = [lm.id for lm in ann.landmarks]
    want = set(range(len(schema.landmark_names)))
    have = set(ids)
    if len(ids) != len(have):
        raise AnnotationError("duplicate landmark ids")
    if have != want:
        missing = sorted(want - have)
        extra = sorted(have - want)
        if missing and not extra:
            raise AnnotationError(f"missing landmark ids {missing}")
        raise AnnotationError(
            f"landmark id set mismatch: missing {missing}, unknown {extra}"
        )
    if ann.garment_kind != schema.garment_kind:
        raise AnnotationError(
            f"garment kind mismatch: annotation is '{ann.garment_kind}', "
            f"schema is '{schema.garment_kind}'"
        )
    w, h = ann.image_size
    if w <= 0 or h <= 0:
        raise AnnotationError(f"image_size must be positive, got {ann.image_size}")
    for lm in ann.landmarks:
        if not (np.isfinite(lm.x) and np.isfinite(lm.y)):
            raise AnnotationError(f"landmark {lm.id} has non-finite coordinates")
        if lm.visible and not (0 <= lm.x <= w and 0 <= lm.y <= h):
            raise AnnotationError(
                f"visible landmark {lm.id} at ({lm.x}, {lm.y}) is outside "
                f"the {w}x{h} image"
            )
    return ann


def annotations_to_doc(ann: AnnotationSet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "image_id": ann.image_id,
        "image_size": [ann.image_size[0], ann.image_size[1]],
        "garment_kind": ann.garment_kind,
        "landmarks": [
            {"id": lm.id, "x": lm.x, "y": lm.y, "visible": lm.visible}
            for lm in ann.landmarks
        ],
    }


def save_annotations(ann: AnnotationSet, path) -> None:
    Path(path).write_text(
        json.dumps(annotations_to_doc(ann), indent=2) + "\n", encoding="utf-8"
    )


def anchors_for(
    panel: Panel, schema: GarmentSchema, ann: AnnotationSet
) -> ControlPairs:
    """Control pairs for one direct panel: atlas-pixel anchors -> image pixels.

    The warp is fitted UV -> image so the texture transfer can sample the
    image once per UV pixel (inverse warping).  Invisible landmarks are
    dropped; fewer than three visible raises InsufficientLandmarksError.
    """
    if panel.fill_role != FILL_DIRECT:
        raise ValueError(f"panel '{panel.name}' is not a direct-fill panel")
    w, h = schema.atlas_size
    sources = []
    targets = []
    for a in panel.anchors:
        lm = ann.point(a.landmark)
        if not lm.visible:
            continue
        sources.append((a.u * w, a.v * h))
        targets.append((lm.x, lm.y))
    if len(sources) < 3:
        raise InsufficientLandmarksError(panel.name, len(sources))
    return ControlPairs(np.array(sources), np.array(targets))


def load_mask(path) -> SegMask:
    from .imageio import read_gray

    return SegMask(read_gray(path))
