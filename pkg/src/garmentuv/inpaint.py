"""Deterministic hole filling and panel-derivation strategies.

The inpainter interface is intentionally minimal (texture with holes in,
completed texture out) so a learned backend can be slotted in behind it
later.  Two classical engines ship:

``diffusion``
    Harmonic fill: hole pixels satisfy the discrete 5-point Laplace
    equation with valid pixels as Dirichlet boundary (panel borders act
    as no-flux edges).  The system is solved directly with a sparse
    factorization, i.e. the relaxation is taken all the way to its
    fixed point; ``tol``/``max_iters`` bound the conjugate-gradient
    fallback used if factorization is unavailable.

``patch_replicate``
    Tiles the flattest patch of the valid region across the holes.

Both engines honor the locality contract: pixels valid in the input are
bit-exact unchanged in the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import InpaintError, ValidationError
from .model import Panel
from .transfer import PanelTexture

METHOD_DIFFUSION = "diffusion"
METHOD_PATCH = "patch_replicate"

BACKFILL_COPY = "copy_front"
BACKFILL_PATCH = "uniform_gradient_patch"


@dataclass(frozen=True)
class InpaintRequest:
    texture: PanelTexture
    method: str = METHOD_DIFFUSION
    max_iters: int = 5000
    tol: float = 0.25  # 8-bit channel units
    patch_size: int = 16


@dataclass(frozen=True)
class BackFillStrategy:
    kind: str = BACKFILL_COPY
    patch_size: int = 16

    def __post_init__(self):
        if self.kind not in (BACKFILL_COPY, BACKFILL_PATCH):
            raise ValidationError(f"unknown back-fill strategy '{self.kind}'")
        if self.kind == BACKFILL_PATCH and self.patch_size < 4:
            raise ValidationError(f"patch_size must be >= 4, got {self.patch_size}")


def _solve_harmonic(
    rgb: np.ndarray, valid: np.ndarray, tol: float, max_iters: int
) -> np.ndarray:
    """Solve the hole pixels of (H, W, 3) float64 rgb in place, returning
    the filled values for hole pixels in row-major order, shape (n, 3)."""
    h, w = valid.shape
    hole = ~valid
    n = int(hole.sum())
    index = np.full((h, w), -1, dtype=np.int64)
    ys, xs = np.nonzero(hole)
    index[ys, xs] = np.arange(n)

    rows, cols, vals = [], [], []
    rhs = np.zeros((n, 3))
    deg = np.zeros(n)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        deg += ok
        nbr_hole = np.zeros(n, dtype=bool)
        nbr_hole[ok] = hole[ny[ok], nx[ok]]
        k = np.flatnonzero(ok & nbr_hole)
        rows.append(k)
        cols.append(index[ny[k], nx[k]])
        vals.append(-np.ones(len(k)))
        b = np.flatnonzero(ok & ~nbr_hole)
        rhs[b] += rgb[ys[b] + dy, xs[b] + dx]

    if (deg == 0).any():
        raise InpaintError("isolated hole pixel with no neighbors")

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(deg)
    lap = scipy.sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    try:
        lu = scipy.sparse.linalg.splu(lap)
        return np.stack([lu.solve(rhs[:, c]) for c in range(3)], axis=1)
    except RuntimeError:
        out = np.zeros((n, 3))
        for c in range(3):
            x, _ = scipy.sparse.linalg.cg(
                lap, rhs[:, c], rtol=0.0, atol=tol, maxiter=max_iters
            )
            out[:, c] = x
        return out


def inpaint(req: InpaintRequest) -> PanelTexture:
    """Fill every hole pixel; valid pixels pass through bit-exact."""
    tex = req.texture
    if not tex.valid.any():
        raise InpaintError(
            f"nothing to anchor: panel '{tex.panel_name}' has no valid pixels"
        )
    if tex.valid.all():
        return PanelTexture(tex.panel_name, tex.pixels.copy(), tex.valid.copy())

    pixels = tex.pixels.copy()
    hole = ~tex.valid
    if req.method == METHOD_DIFFUSION:
        rgb = tex.pixels[:, :, :3].astype(np.float64)
        filled = _solve_harmonic(rgb, tex.valid, req.tol, req.max_iters)
        pixels[hole, :3] = np.clip(np.rint(filled), 0, 255).astype(np.uint8)
        pixels[hole, 3] = 255
    elif req.method == METHOD_PATCH:
        px, py = _flattest_valid_patch(tex.pixels, tex.valid, req.patch_size)
        patch = tex.pixels[py : py + req.patch_size, px : px + req.patch_size]
        ys, xs = np.nonzero(hole)
        pixels[ys, xs] = patch[ys % req.patch_size, xs % req.patch_size]
        pixels[ys, xs, 3] = 255
    else:
        raise ValidationError(f"unknown inpaint method '{req.method}'")

    return PanelTexture(tex.panel_name, pixels, np.ones_like(tex.valid))


def _patch_gradient_scores(rgb: np.ndarray, size: int) -> np.ndarray:
    """Gradient-flatness score for every size-aligned patch.

    Score = sum over channels of |forward difference| taken inside the
    patch.  Returns (rows, cols) float64; lower is flatter.
    """
    h, w = rgb.shape[:2]
    ny, nx = h // size, w // size
    f = rgb.astype(np.float64)
    dx = np.abs(np.diff(f, axis=1)).sum(axis=2)  # (h, w-1)
    dy = np.abs(np.diff(f, axis=0)).sum(axis=2)  # (h-1, w)
    scores = np.zeros((ny, nx))
    for j in range(ny):
        for i in range(nx):
            y0, x0 = j * size, i * size
            scores[j, i] = (
                dx[y0 : y0 + size, x0 : x0 + size - 1].sum()
                + dy[y0 : y0 + size - 1, x0 : x0 + size].sum()
            )
    return scores


def _flattest_valid_patch(
    pixels: np.ndarray, valid: np.ndarray, size: int
) -> tuple[int, int]:
    h, w = valid.shape
    if size < 4 or size > min(h, w):
        raise ValidationError(
            f"patch_size {size} out of range [4, {min(h, w)}] for {w}x{h} panel"
        )
    ny, nx = h // size, w // size
    scores = _patch_gradient_scores(pixels[:, :, :3], size)
    fully_valid = valid[: ny * size, : nx * size].reshape(ny, size, nx, size)
    fully_valid = fully_valid.all(axis=(1, 3))
    if not fully_valid.any():
        raise InpaintError(f"no fully valid {size}x{size} patch to replicate")
    scores[~fully_valid] = np.inf
    # argmin scans row-major, so ties break topmost-then-leftmost.
    j, i = np.unravel_index(np.argmin(scores), scores.shape)
    return int(i * size), int(j * size)


def _resample_bilinear(src: np.ndarray, out_size: tuple[int, int], flip_x: bool):
    """Scale (H, W, 4) uint8 to out_size, optionally mirrored about the
    vertical centerline.  Equal extents reduce to an exact copy/flip."""
    sh, sw = src.shape[:2]
    ow, oh = out_size
    if (sw, sh) == (ow, oh):
        return src[:, ::-1].copy() if flip_x else src.copy()
    xs = (np.arange(ow) + 0.5) * (sw / ow)
    if flip_x:
        xs = sw - xs
    ys = (np.arange(oh) + 0.5) * (sh / oh)
    fx = np.clip(xs - 0.5, 0, sw - 1)
    fy = np.clip(ys - 0.5, 0, sh - 1)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    ax = (fx - x0)[None, :, None]
    ay = (fy - y0)[:, None, None]
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    f = src.astype(np.float64)
    top = f[y0[:, None], x0[None, :]] * (1 - ax) + f[y0[:, None], x1[None, :]] * ax
    bot = f[y1[:, None], x0[None, :]] * (1 - ax) + f[y1[:, None], x1[None, :]] * ax
    return np.clip(np.rint(top * (1 - ay) + bot * ay), 0, 255).astype(np.uint8)


def fill_back_panel(
    front: PanelTexture,
    strategy: BackFillStrategy,
    back_panel: Panel,
    atlas_size: tuple[int, int],
) -> PanelTexture:
    """Derive a back-panel texture from a completed front panel."""
    if not front.valid.all():
        raise ValidationError("back fill requires a hole-free front panel")
    out_size = back_panel.pixel_size(atlas_size)
    if strategy.kind == BACKFILL_COPY:
        pixels = _resample_bilinear(front.pixels, out_size, flip_x=False)
    else:
        size = strategy.patch_size
        fh, fw = front.pixels.shape[:2]
        if size > min(fh, fw):
            raise ValidationError(
                f"patch_size {size} exceeds front panel extent {fw}x{fh}"
            )
        px, py = _flattest_valid_patch(front.pixels, front.valid, size)
        patch = front.pixels[py : py + size, px : px + size]
        ow, oh = out_size
        reps = (-(-oh // size), -(-ow // size), 1)
        pixels = np.tile(patch, reps)[:oh, :ow]
    return PanelTexture(
        back_panel.name, pixels, np.ones((out_size[1], out_size[0]), dtype=bool)
    )


def mirror_fill(
    source: PanelTexture, target_panel: Panel, atlas_size: tuple[int, int]
) -> PanelTexture:
    """Reflected copy of a completed panel (x' = width - 1 - x when the
    extents match; bilinear resampling otherwise)."""
    if not source.valid.all():
        raise ValidationError("mirror fill requires a hole-free source panel")
    out_size = target_panel.pixel_size(atlas_size)
    pixels = _resample_bilinear(source.pixels, out_size, flip_x=True)
    return PanelTexture(
        target_panel.name, pixels, np.ones((out_size[1], out_size[0]), dtype=bool)
    )
