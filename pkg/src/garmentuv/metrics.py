"""Evaluation metrics: landmark error (NMSE) and image quality (PSNR, SSIM).

NMSE normalizes squared landmark displacement by the squared image
diagonal, which makes it resolution-invariant but NOT directly
comparable to numbers computed with other normalizers; treat values as
internal-relative only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .model import AnnotationSet

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2

# Rec. 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class MetricReport:
    name: str
    details: list[float] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.details)

    @property
    def value(self) -> float:
        if not self.details:
            raise ValidationError(f"metric '{self.name}' has no samples")
        return float(np.mean(self.details))


def nmse(pred: AnnotationSet, gt: AnnotationSet) -> float:
    """Mean squared landmark displacement over ground-truth-visible
    landmarks, normalized by the squared image diagonal."""
    if pred.image_size != gt.image_size:
        raise ValidationError(
            f"image size mismatch: {pred.image_size} vs {gt.image_size}"
        )
    if {lm.id for lm in pred.landmarks} != {lm.id for lm in gt.landmarks}:
        raise ValidationError("landmark id sets differ")
    w, h = gt.image_size
    d2 = float(w * w + h * h)
    errors = []
    for g in gt.landmarks:
        if not g.visible:
            continue
        p = pred.point(g.id)
        errors.append(((p.x - g.x) ** 2 + (p.y - g.y) ** 2) / d2)
    if not errors:
        raise ValidationError("no visible landmarks to evaluate")
    return float(np.mean(errors))


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB over RGB (alpha ignored).

    mask, when given, selects the pixels to compare.  Identical inputs
    return math.inf.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    ra = a[:, :, :3].astype(np.float64)
    rb = b[:, :, :3].astype(np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[:2]:
            raise ValidationError(f"mask shape {mask.shape} != image {a.shape[:2]}")
        if not mask.any():
            raise ValidationError("empty mask")
        ra, rb = ra[mask], rb[mask]
    mse = float(np.mean((ra - rb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    k = np.exp(-(r**2) / (2 * sigma**2))
    return k / k.sum()


def _gaussian_filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable Gaussian filtering, cropped to the fully-covered region."""
    r = len(kernel) // 2
    out = ndimage.correlate1d(img, kernel, axis=0, mode="constant")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over the luma channel.

    Gaussian 11x11 window (sigma 1.5); statistics are taken only where
    the window fits entirely inside the image.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValidationError(
            f"image {a.shape[1]}x{a.shape[0]} smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    ya = a[:, :, :3].astype(np.float64) @ _LUMA
    yb = b[:, :, :3].astype(np.float64) @ _LUMA

    k = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = _gaussian_filter_valid(ya, k)
    mu_b = _gaussian_filter_valid(yb, k)
    ea2 = _gaussian_filter_valid(ya * ya, k)
    eb2 = _gaussian_filter_valid(yb * yb, k)
    eab = _gaussian_filter_valid(ya * yb, k)
    var_a = ea2 - mu_a * mu_a
    var_b = eb2 - mu_b * mu_b
    cov = eab - mu_a * mu_b

    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))
