"""Synthetic catalog images with exact ground truth.

Each sample starts from procedurally textured panels, pushes them
through known per-panel warps into a flat catalog-style image, and
emits the warped-in textures, warps, segmentation labels, and landmark
positions as ground truth.  Running the digitization pipeline on a
sample and comparing against its ground-truth atlas is the closed-loop
oracle the acceptance suite is built on.

Construction, in order per sample:

1. synthesize a texture for every direct-fill panel;
2. build a ground-truth warp per panel by jittering each landmark's
   canonical image position by ``warp_magnitude`` (a fraction of the
   image diagonal), rejecting folded warps by sampling the Jacobian
   sign on a grid (100 retries, then error);
3. render the image by inverting the warp per image pixel (fixed-point
   iteration from the query point, 0.05 px tolerance, 20 iters max)
   and sampling the panel texture;
4. label rendered pixels as garment;
5. composite skin-toned capsule occluders, labeled occluder;
6. apply one of up to six gain + linear-gradient lighting presets
   (preset 1 is the identity);
7. emit annotations at the exact jittered anchor positions.

At warp_magnitude = 0 the canonical placement is an integer translation
per panel, so rendering and the later texture transfer are both exact
and the round trip is bit-exact.

Everything is deterministic given (config.seed, sample index); samples
may be generated in parallel without changing any byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ValidationError
from .imageio import write_png
from .model import (
    MASK_BACKGROUND,
    MASK_GARMENT,
    MASK_OCCLUDER,
    AnnotationSet,
    GarmentSchema,
    LandmarkPoint,
    SegMask,
    annotations_to_doc,
)
from .tps import ControlPairs, TpsTransform, evaluate, fit_tps
from .transfer import PanelTexture, UvAtlas, compose_atlas

TEXTURE_FAMILIES = (
    "solid",
    "stripes",
    "checks",
    "gradient",
    "perlin_noise",
    "logo_stamp",
)

# (gain, horizontal gradient, vertical gradient); preset 1 is identity.
LIGHTING_PRESETS = (
    (1.00, 0.00, 0.00),
    (0.92, 0.12, 0.00),
    (1.06, -0.10, 0.06),
    (0.85, 0.00, 0.22),
    (1.10, 0.06, -0.12),
    (0.96, -0.08, 0.16),
)

SKIN_TONES = ((241, 194, 125), (224, 172, 105), (198, 134, 66), (141, 85, 36))

BACKGROUND_RGBA = (245, 245, 245, 255)

INVERT_TOL_PX = 0.05
INVERT_MAX_ITERS = 20
FOLD_RETRIES = 100


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    count: int = 1
    garment_kind: str = "tshirt"
    texture_family: str = "checks"
    warp_magnitude: float = 0.0
    occluder_count: int = 0
    occluder_size_range: tuple[float, float] = (0.04, 0.10)
    lighting_modes: int = 1
    image_size: tuple[int, int] = (768, 1024)

    def __post_init__(self):
        if self.texture_family not in TEXTURE_FAMILIES:
            raise ValidationError(f"unknown texture family '{self.texture_family}'")
        if not 0.0 <= self.warp_magnitude <= 0.1:
            raise ValidationError(
                f"warp_magnitude must be in [0, 0.1], got {self.warp_magnitude}"
            )
        if self.occluder_count < 0:
            raise ValidationError("occluder_count must be >= 0")
        lo, hi = self.occluder_size_range
        if not 0 < lo <= hi:
            raise ValidationError(
                f"occluder_size_range must be ordered and positive, got {(lo, hi)}"
            )
        if not 1 <= self.lighting_modes <= len(LIGHTING_PRESETS):
            raise ValidationError(
                f"lighting_modes must be in [1, {len(LIGHTING_PRESETS)}]"
            )
        if self.count < 0:
            raise ValidationError("count must be >= 0")


@dataclass
class SynthSample:
    sample_id: str
    image: np.ndarray  # (H, W, 4) uint8
    mask: SegMask
    annotations: AnnotationSet
    gt_atlas: UvAtlas
    gt_warps: dict[str, TpsTransform]
    config: SynthConfig = field(repr=False)
    index: int = 0


# ---------------------------------------------------------------------------
# Procedural panel textures


def _color(rng) -> np.ndarray:
    return rng.integers(25, 231, size=3).astype(np.float64)


def synth_texture(family: str, size: tuple[int, int], rng) -> np.ndarray:
    """A (h, w, 4) uint8 texture of the requested family."""
    w, h = size
    xs, ys = np.meshgrid(np.arange(w), np.arange(h), indexing="xy")
    c1, c2 = _color(rng), _color(rng)
    if family == "solid":
        rgb = np.broadcast_to(c1, (h, w, 3)).copy()
    elif family == "stripes":
        # Sinusoidal bands: band-limited on purpose so resampling
        # round-trips stay benign.
        period = float(rng.uniform(18, 48))
        angle = float(rng.uniform(0, math.pi))
        phase = (xs * math.cos(angle) + ys * math.sin(angle)) / period
        t = (1 + np.sin(2 * math.pi * phase)) / 2
        rgb = c1 + (c2 - c1) * t[:, :, None]
    elif family == "checks":
        cell = int(rng.integers(16, 49))
        board = ((xs // cell) + (ys // cell)) % 2
        rgb = np.where(board[:, :, None] == 0, c1, c2)
    elif family == "gradient":
        gx, gy = rng.uniform(-1, 1, 2)
        norm = abs(gx) * (w - 1) + abs(gy) * (h - 1) or 1.0
        t = (gx * xs + gy * ys) / norm
        t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
        rgb = c1 + (c2 - c1) * t[:, :, None]
    elif family == "perlin_noise":
        rgb = np.zeros((h, w, 3))
        amp, cells = 1.0, 4
        for _ in range(3):
            coarse = rng.uniform(0, 1, (cells + 1, cells + 1))
            gy = ys * (cells / max(h - 1, 1))
            gx = xs * (cells / max(w - 1, 1))
            y0 = np.clip(gy.astype(int), 0, cells - 1)
            x0 = np.clip(gx.astype(int), 0, cells - 1)
            fy, fx = gy - y0, gx - x0
            sy = fy * fy * (3 - 2 * fy)
            sx = fx * fx * (3 - 2 * fx)
            top = coarse[y0, x0] * (1 - sx) + coarse[y0, x0 + 1] * sx
            bot = coarse[y0 + 1, x0] * (1 - sx) + coarse[y0 + 1, x0 + 1] * sx
            rgb += amp * (top * (1 - sy) + bot * sy)[:, :, None]
            amp *= 0.5
            cells *= 2
        rgb = rgb / rgb.max(axis=(0, 1), keepdims=True)
        rgb = c1 + (c2 - c1) * rgb
    elif family == "logo_stamp":
        rgb = np.broadcast_to(c1, (h, w, 3)).copy()
        lw, lh = max(w // 4, 2), max(h // 6, 2)
        x0 = (w - lw) // 2
        y0 = (h - lh) // 2
        inside = (xs >= x0) & (xs < x0 + lw) & (ys >= y0) & (ys < y0 + lh)
        rgb[inside] = c2
    else:
        raise ValidationError(f"unknown texture family '{family}'")
    out = np.empty((h, w, 4), dtype=np.uint8)
    out[:, :, :3] = np.clip(np.rint(rgb), 0, 255)
    out[:, :, 3] = 255
    return out


# ---------------------------------------------------------------------------
# Canonical layout, warps, inversion


def canonical_layout(
    schema: GarmentSchema, image_size: tuple[int, int], margin: int
) -> dict[str, tuple[int, int]]:
    """Shelf-pack the direct panels into the image at integer offsets.

    Returns panel name -> (ox, oy) placement of the panel's pixel rect.
    """
    iw, ih = image_size
    x, y = margin, margin
    shelf = 0
    placements: dict[str, tuple[int, int]] = {}
    for panel in schema.direct_panels:
        pw, ph = panel.pixel_size(schema.atlas_size)
        if x + pw + margin > iw:
            x = margin
            y += shelf + margin
            shelf = 0
        if x + pw + margin > iw or y + ph + margin > ih:
            raise ValidationError(
                f"image {iw}x{ih} too small for panel layout at this atlas size"
            )
        placements[panel.name] = (x, y)
        x += pw + margin
        shelf = max(shelf, ph)
    return placements


def canonical_landmark_positions(
    schema: GarmentSchema, image_size: tuple[int, int], margin: int | None = None
) -> dict[int, tuple[float, float]]:
    """Canonical image position for every landmark (also used by the
    annotation service to seed default layouts).

    Requires each landmark to be anchored by exactly one direct panel.
    """
    if margin is None:
        margin = 16
    placements = canonical_layout(schema, image_size, margin)
    w, h = schema.atlas_size
    positions: dict[int, tuple[float, float]] = {}
    for panel in schema.direct_panels:
        x0, y0, _, _ = panel.pixel_rect(schema.atlas_size)
        ox, oy = placements[panel.name]
        for a in panel.anchors:
            if a.landmark in positions:
                raise ValidationError(
                    f"landmark '{schema.landmark_names[a.landmark]}' is anchored "
                    "by more than one direct panel; synthetic layouts need "
                    "disjoint per-panel landmark sets"
                )
            positions[a.landmark] = (a.u * w - x0 + ox, a.v * h - y0 + oy)
    missing = set(range(len(schema.landmark_names))) - positions.keys()
    if missing:
        names = [schema.landmark_names[i] for i in sorted(missing)]
        raise ValidationError(f"landmarks {names} are not anchored by any direct panel")
    return positions


def warp_jacobian(t: TpsTransform, points: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the warp at each (n, 2) point, shape (n, 2, 2)."""
    diff = points[:, None, :] - t.sources[None, :, :]  # (n, m, 2)
    r2 = (diff**2).sum(axis=2)
    # d/dp r^2 log r = (2 log r + 1) * (p - s); zero at r = 0.
    g = np.zeros_like(r2)
    nz = r2 > 0
    g[nz] = np.log(r2[nz]) + 1.0
    grad_u = g[:, :, None] * diff  # (n, m, 2)
    jac = np.broadcast_to(t.affine[:, 1:], (len(points), 2, 2)).copy()
    jac += np.einsum("mc,nmd->ncd", t.weights, grad_u)
    return jac


def warp_jacobian_dets(t: TpsTransform, points: np.ndarray) -> np.ndarray:
    """Jacobian determinant of the warp at each (n, 2) point."""
    jac = warp_jacobian(t, points)
    return jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]


def invert_warp(
    t: TpsTransform, queries: np.ndarray, tol: float = INVERT_TOL_PX
) -> tuple[np.ndarray, np.ndarray]:
    """Solve f(u) = q per row, iterating from the query point itself.

    Each step applies the Jacobian-corrected update
    u += J(u)^-1 (q - f(u)); fold-over rejection keeps J invertible on
    the region of interest so a handful of iterations suffices.
    Returns (u, converged).
    """
    u = queries.astype(np.float64).copy()
    converged = np.zeros(len(u), dtype=bool)
    for _ in range(INVERT_MAX_ITERS):
        r = queries - evaluate(t, u)
        converged = np.abs(r).max(axis=1) < tol
        if converged.all():
            break
        jac = warp_jacobian(t, u)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        safe = np.where(np.abs(det) > 1e-9, det, 1.0)
        du_x = (jac[:, 1, 1] * r[:, 0] - jac[:, 0, 1] * r[:, 1]) / safe
        du_y = (-jac[:, 1, 0] * r[:, 0] + jac[:, 0, 0] * r[:, 1]) / safe
        u[:, 0] += du_x
        u[:, 1] += du_y
    return u, converged


def _fit_panel_warps(schema, targets_by_landmark):
    w, h = schema.atlas_size
    warps = {}
    for panel in schema.direct_panels:
        sources = [(a.u * w, a.v * h) for a in panel.anchors]
        targets = [targets_by_landmark[a.landmark] for a in panel.anchors]
        warps[panel.name] = fit_tps(
            ControlPairs(np.array(sources), np.array(targets))
        )
    return warps


def _warps_fold_free(schema, warps) -> bool:
    for panel in schema.direct_panels:
        x0, y0, x1, y1 = panel.pixel_rect(schema.atlas_size)
        gx = np.linspace(x0, x1, 12)
        gy = np.linspace(y0, y1, 12)
        mx, my = np.meshgrid(gx, gy, indexing="xy")
        grid = np.stack([mx.ravel(), my.ravel()], axis=1)
        dets = warp_jacobian_dets(warps[panel.name], grid)
        if not (dets > 1e-3).all():
            return False
    return True


def _render_panel(image, labels, warp, panel, atlas_size, texture):
    x0, y0, x1, y1 = panel.pixel_rect(atlas_size)
    pw, ph = x1 - x0, y1 - y0
    ih, iw = image.shape[:2]

    border = np.linspace(0, 1, 48)
    edges = np.concatenate(
        [
            np.stack([x0 + border * pw, np.full_like(border, y0)], axis=1),
            np.stack([x0 + border * pw, np.full_like(border, y1)], axis=1),
            np.stack([np.full_like(border, x0), y0 + border * ph], axis=1),
            np.stack([np.full_like(border, x1), y0 + border * ph], axis=1),
        ]
    )
    fwd = evaluate(warp, edges)
    bx0 = max(int(np.floor(fwd[:, 0].min())) - 3, 0)
    by0 = max(int(np.floor(fwd[:, 1].min())) - 3, 0)
    bx1 = min(int(np.ceil(fwd[:, 0].max())) + 3, iw)
    by1 = min(int(np.ceil(fwd[:, 1].max())) + 3, ih)
    if bx0 >= bx1 or by0 >= by1:
        return

    cx, cy = np.meshgrid(
        bx0 + np.arange(bx1 - bx0) + 0.5, by0 + np.arange(by1 - by0) + 0.5,
        indexing="xy",
    )
    queries = np.stack([cx.ravel(), cy.ravel()], axis=1)
    uv, converged = invert_warp(warp, queries)

    ux = uv[:, 0] - x0
    uy = uv[:, 1] - y0
    inside = converged & (ux >= 0) & (ux < pw) & (uy >= 0) & (uy < ph)
    if not inside.any():
        return

    # Clamped bilinear sample of the panel texture.
    fx = np.clip(ux[inside] - 0.5, 0, pw - 1)
    fy = np.clip(uy[inside] - 0.5, 0, ph - 1)
    ix0 = np.floor(fx).astype(np.int64)
    iy0 = np.floor(fy).astype(np.int64)
    ax = fx - ix0
    ay = fy - iy0
    ix1 = np.minimum(ix0 + 1, pw - 1)
    iy1 = np.minimum(iy0 + 1, ph - 1)
    f = texture[:, :, :3].astype(np.float64)
    top = f[iy0, ix0] * (1 - ax)[:, None] + f[iy0, ix1] * ax[:, None]
    bot = f[iy1, ix0] * (1 - ax)[:, None] + f[iy1, ix1] * ax[:, None]
    rgb = top * (1 - ay)[:, None] + bot * ay[:, None]

    sel = np.flatnonzero(inside)
    py = sel // (bx1 - bx0) + by0
    px = sel % (bx1 - bx0) + bx0
    image[py, px, :3] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    image[py, px, 3] = 255
    labels[py, px] = MASK_GARMENT


def _composite_occluders(image, labels, rng, config):
    garment = labels == MASK_GARMENT
    if not garment.any():
        return
    ys, xs = np.nonzero(garment)
    gx0, gx1 = xs.min(), xs.max()
    gy0, gy1 = ys.min(), ys.max()
    ih, iw = labels.shape
    lo, hi = config.occluder_size_range
    base = min(iw, ih)
    yy, xx = np.mgrid[0:ih, 0:iw]
    for _ in range(config.occluder_count):
        radius = rng.uniform(lo, hi) * base / 2
        length = radius * rng.uniform(1.0, 3.0)
        angle = rng.uniform(0, math.pi)
        cx = rng.uniform(gx0, gx1 + 1)
        cy = rng.uniform(gy0, gy1 + 1)
        dx, dy = math.cos(angle) * length / 2, math.sin(angle) * length / 2
        ax_, ay_ = cx - dx, cy - dy
        bx_, by_ = cx + dx, cy + dy
        tone = SKIN_TONES[int(rng.integers(0, len(SKIN_TONES)))]
        # Distance from each pixel centre to the capsule axis segment.
        px = xx + 0.5
        py = yy + 0.5
        vx, vy = bx_ - ax_, by_ - ay_
        seg2 = vx * vx + vy * vy or 1.0
        t = np.clip(((px - ax_) * vx + (py - ay_) * vy) / seg2, 0, 1)
        d2 = (px - (ax_ + t * vx)) ** 2 + (py - (ay_ + t * vy)) ** 2
        hit = d2 <= radius * radius
        image[hit, :3] = tone
        image[hit, 3] = 255
        labels[hit] = MASK_OCCLUDER


def _apply_lighting(image, mode: int):
    gain, gx, gy = LIGHTING_PRESETS[mode - 1]
    if (gain, gx, gy) == (1.0, 0.0, 0.0):
        return
    h, w = image.shape[:2]
    xr = np.linspace(-0.5, 0.5, w)[None, :]
    yr = np.linspace(-0.5, 0.5, h)[:, None]
    factor = gain + gx * xr + gy * yr
    rgb = image[:, :, :3].astype(np.float64) * factor[:, :, None]
    image[:, :, :3] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def _margin_for(config: SynthConfig) -> int:
    iw, ih = config.image_size
    diag = math.hypot(iw, ih)
    return max(16, int(math.ceil(2.5 * config.warp_magnitude * diag)))


def generate(config: SynthConfig, schema: GarmentSchema) -> Iterator[SynthSample]:
    """Yield ``config.count`` deterministic samples for ``schema``."""
    if schema.garment_kind != config.garment_kind:
        raise ValidationError(
            f"schema garment kind '{schema.garment_kind}' does not match "
            f"config '{config.garment_kind}'"
        )
    for index in range(config.count):
        yield generate_sample(config, schema, index)


def generate_sample(
    config: SynthConfig, schema: GarmentSchema, index: int
) -> SynthSample:
    rng = np.random.default_rng((config.seed & 0xFFFFFFFFFFFFFFFF, index))
    iw, ih = config.image_size
    margin = _margin_for(config)
    canonical = canonical_landmark_positions(schema, config.image_size, margin)
    diag = math.hypot(iw, ih)

    textures = {
        p.name: synth_texture(
            config.texture_family, p.pixel_size(schema.atlas_size), rng
        )
        for p in schema.direct_panels
    }

    for attempt in range(FOLD_RETRIES):
        targets = {
            lm: (
                pos[0] + rng.uniform(-1, 1) * config.warp_magnitude * diag,
                pos[1] + rng.uniform(-1, 1) * config.warp_magnitude * diag,
            )
            for lm, pos in canonical.items()
        }
        warps = _fit_panel_warps(schema, targets)
        if _warps_fold_free(schema, warps):
            break
    else:
        raise ValidationError(
            f"warp magnitude too large: no fold-free warp in {FOLD_RETRIES} tries"
        )

    image = np.empty((ih, iw, 4), dtype=np.uint8)
    image[:, :] = BACKGROUND_RGBA
    labels = np.full((ih, iw), MASK_BACKGROUND, dtype=np.uint8)
    for panel in schema.direct_panels:
        _render_panel(
            image, labels, warps[panel.name], panel, schema.atlas_size,
            textures[panel.name],
        )
    _composite_occluders(image, labels, rng, config)
    mode = int(rng.integers(1, config.lighting_modes + 1))
    _apply_lighting(image, mode)

    annotations = AnnotationSet(
        image_id=f"sample_{index:04d}",
        image_size=config.image_size,
        garment_kind=config.garment_kind,
        landmarks=tuple(
            LandmarkPoint(lm, targets[lm][0], targets[lm][1], True)
            for lm in sorted(targets)
        ),
    )
    gt_atlas = compose_atlas(
        [
            PanelTexture(p.name, textures[p.name],
                         np.ones(textures[p.name].shape[:2], dtype=bool))
            for p in schema.direct_panels
        ],
        schema,
    )
    return SynthSample(
        sample_id=annotations.image_id,
        image=image,
        mask=SegMask(labels),
        annotations=annotations,
        gt_atlas=gt_atlas,
        gt_warps=warps,
        config=config,
        index=index,
    )


def emit_dataset(samples: Iterable[SynthSample], directory) -> dict:
    """Write samples plus a manifest with content hashes; returns the
    manifest.  Re-emitting the same configuration reproduces identical
    bytes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []

    def emit(name: str, role: str, writer):
        path = directory / name
        try:
            writer(path)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entries.append({"name": name, "role": role, "sha256": digest})

    for sample in samples:
        sid = sample.sample_id
        emit(f"{sid}.image.png", "image", lambda p: write_png(p, sample.image))
        emit(f"{sid}.mask.png", "mask", lambda p: write_png(p, sample.mask.labels))
        emit(
            f"{sid}.annotations.json",
            "annotations",
            lambda p: p.write_text(
                json.dumps(annotations_to_doc(sample.annotations), indent=2,
                           sort_keys=True) + "\n",
                encoding="utf-8",
            ),
        )
        emit(f"{sid}.atlas.png", "gt_atlas",
             lambda p: write_png(p, sample.gt_atlas.pixels))

    manifest = {
        "format_version": 1,
        "entries": sorted(entries, key=lambda e: e["name"]),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
