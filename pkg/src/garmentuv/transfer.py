"""Inverse-warp the catalog image into UV panels and compose the atlas.

Each direct panel is filled independently: a spline is fitted from the
panel's atlas-pixel anchors to the annotated image positions, every UV
pixel centre is pushed through it, and the image is sampled bilinearly
at the result.  A pixel becomes a hole when its sample point leaves the
image or when the garment label does not dominate the bilinear
footprint, so occluders and background never bleed into the texture.

Continuous coordinates put texel (i, j) at centre (i + 0.5, j + 0.5);
sampling at an exact centre reproduces the texel bit-exactly, which the
round-trip tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExtentMismatchError, SchemaError, SingularFitError, ValidationError
from .model import MASK_GARMENT, GarmentSchema, Panel, SegMask
from .tps import ControlPairs, evaluate, fit_tps

HOLE_RGBA = (0, 0, 0, 0)


@dataclass
class PanelTexture:
    """Color buffer for one panel plus its per-pixel validity mask.

    Hole pixels always carry the (0, 0, 0, 0) sentinel.  error_cause is
    set when the panel degraded to all-hole because its warp could not
    be fitted.
    """

    panel_name: str
    pixels: np.ndarray  # (H, W, 4) uint8
    valid: np.ndarray  # (H, W) bool
    error_cause: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        va = np.asarray(self.valid, dtype=bool)
        if px.ndim != 3 or px.shape[2] != 4:
            raise ValidationError(f"pixels must be (H, W, 4), got {px.shape}")
        if va.shape != px.shape[:2]:
            raise ValidationError(
                f"valid mask shape {va.shape} != pixel extent {px.shape[:2]}"
            )
        px = px.copy()
        px[~va] = HOLE_RGBA
        self.pixels = px
        self.valid = va

    @property
    def size(self) -> tuple[int, int]:
        return (self.pixels.shape[1], self.pixels.shape[0])

    @property
    def hole_fraction(self) -> float:
        return float(1.0 - self.valid.mean()) if self.valid.size else 1.0

    @classmethod
    def all_hole(cls, panel_name: str, size: tuple[int, int], cause: str | None = None):
        w, h = size
        return cls(
            panel_name=panel_name,
            pixels=np.zeros((h, w, 4), dtype=np.uint8),
            valid=np.zeros((h, w), dtype=bool),
            error_cause=cause,
        )


@dataclass
class UvAtlas:
    """Composed atlas image: panels blitted at their schema rectangles."""

    size: tuple[int, int]
    pixels: np.ndarray  # (H, W, 4) uint8
    valid: np.ndarray  # (H, W) bool
    panel_rects: dict[str, tuple[int, int, int, int]] = field(default_factory=dict)


def bilinear_sample(image: np.ndarray, points: np.ndarray):
    """Sample (H, W, C) image at continuous pixel coordinates (n, 2).

    Returns (values (n, C) float64, taps (n, 4) flat indices,
    weights (n, 4)).  Caller must ensure points are inside
    [0.5, W-0.5] x [0.5, H-0.5]; indices clamp so zero-weight taps on
    the far border stay in range.
    """
    h, w = image.shape[:2]
    fx = points[:, 0] - 0.5
    fy = points[:, 1] - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    ax = fx - x0
    ay = fy - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    weights = np.stack(
        [(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay], axis=1
    )
    taps = np.stack([y0c * w + x0c, y0c * w + x1c, y1c * w + x0c, y1c * w + x1c], axis=1)
    flat = image.reshape(h * w, -1).astype(np.float64)
    values = np.einsum("nt,ntc->nc", weights, flat[taps])
    return values, taps, weights


def transfer_panel(
    image: np.ndarray,
    mask: SegMask,
    pairs: ControlPairs,
    panel: Panel,
    atlas_size: tuple[int, int],
    lam: float = 0.0,
) -> PanelTexture:
    """Fill one panel by inverse-warping the image through a fitted spline.

    pairs map atlas pixels -> image pixels (see anchors_for).  Fit
    failures degrade to an all-hole texture tagged with the cause rather
    than raising, so one bad panel cannot abort a batch.
    """
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 4:
        raise ValidationError(f"image must be (H, W, 4) RGBA, got {image.shape}")
    if (mask.height, mask.width) != image.shape[:2]:
        raise ValidationError(
            f"mask {mask.width}x{mask.height} does not match image "
            f"{image.shape[1]}x{image.shape[0]}"
        )
    size = panel.pixel_size(atlas_size)
    if pairs is not None and len(pairs) < 3:
        return PanelTexture.all_hole(panel.name, size, "insufficient landmarks")
    try:
        warp = fit_tps(pairs, lam)
    except SingularFitError as exc:
        return PanelTexture.all_hole(panel.name, size, str(exc))

    x0, y0, x1, y1 = panel.pixel_rect(atlas_size)
    pw, ph = x1 - x0, y1 - y0
    xs, ys = np.meshgrid(
        x0 + np.arange(pw) + 0.5, y0 + np.arange(ph) + 0.5, indexing="xy"
    )
    centers = np.stack([xs.ravel(), ys.ravel()], axis=1)
    q = evaluate(warp, centers)

    ih, iw = image.shape[:2]
    inside = (
        (q[:, 0] >= 0.5)
        & (q[:, 0] <= iw - 0.5)
        & (q[:, 1] >= 0.5)
        & (q[:, 1] <= ih - 0.5)
    )

    pixels = np.zeros((ph * pw, 4), dtype=np.uint8)
    valid = np.zeros(ph * pw, dtype=bool)
    if inside.any():
        qi = q[inside]
        _, taps, weights = bilinear_sample(image[:, :, :3], qi)
        garment = (mask.labels.reshape(-1)[taps] == MASK_GARMENT).astype(np.float64)
        garment_weight = (weights * garment).sum(axis=1)
        ok = garment_weight > 0.5
        # Renormalize over garment-labeled taps so occluder/background
        # colors never bleed into edge texels.
        gw = weights * garment
        flat = image[:, :, :3].reshape(-1, 3).astype(np.float64)
        rgb = np.einsum("nt,ntc->nc", gw[ok], flat[taps[ok]])
        rgb /= garment_weight[ok][:, None]
        sel = np.flatnonzero(inside)[ok]
        pixels[sel, :3] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
        pixels[sel, 3] = 255
        valid[sel] = True

    return PanelTexture(
        panel_name=panel.name,
        pixels=pixels.reshape(ph, pw, 4),
        valid=valid.reshape(ph, pw),
    )


def compose_atlas(panels: list[PanelTexture], schema: GarmentSchema) -> UvAtlas:
    """Blit panel textures into one atlas; non-panel pixels stay transparent."""
    w, h = schema.atlas_size
    pixels = np.zeros((h, w, 4), dtype=np.uint8)
    valid = np.zeros((h, w), dtype=bool)
    rects: dict[str, tuple[int, int, int, int]] = {}
    for tex in panels:
        spec = None
        for p in schema.panels:
            if p.name == tex.panel_name:
                spec = p
                break
        if spec is None:
            raise SchemaError(f"unknown panel '{tex.panel_name}'")
        x0, y0, x1, y1 = spec.pixel_rect(schema.atlas_size)
        if tex.size != (x1 - x0, y1 - y0):
            raise ExtentMismatchError(
                f"panel '{tex.panel_name}' extent {tex.size} does not match "
                f"schema extent {(x1 - x0, y1 - y0)} at atlas size {w}x{h}"
            )
        pixels[y0:y1, x0:x1] = tex.pixels
        valid[y0:y1, x0:x1] = tex.valid
        rects[tex.panel_name] = (x0, y0, x1, y1)
    return UvAtlas(size=(w, h), pixels=pixels, valid=valid, panel_rects=rects)
