"""2D thin-plate-spline fitting and evaluation.

A fitted transform maps source points to target points as

    f(p) = a0 + ax * p.x + ay * p.y + sum_i w_i * U(|p - s_i|)

with the radial kernel U(r) = r^2 * log(r) (U(0) = 0).  Coefficients come
from the symmetric augmented system

    [[K + lam*I, P], [P^T, 0]] @ [w; a] = [targets; 0]

where K_ij = U(|s_i - s_j|) and the rows of P are (1, x_i, y_i).  The
zero block forces the side conditions sum(w) = 0, sum(w*x) = 0,
sum(w*y) = 0, which make the transform affine at infinity.  At lam = 0
the fit interpolates the targets exactly; lam > 0 trades data fidelity
for lower bending energy.

Systems here are tiny (landmark counts <= ~20), so a direct dense solve
is used throughout.  All functions are pure; ``TpsTransform`` is frozen
and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularFitError, ValidationError

# Collinearity / duplicate detection thresholds, relative to point scale.
_COLLINEAR_RTOL = 1e-9
_DUPLICATE_RTOL = 1e-12
_SIDE_CONDITION_TOL = 1e-8


def _as_points(pts) -> np.ndarray:
    a = np.asarray(pts, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, 2)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValidationError(f"expected points of shape (n, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("points must be finite (no NaN/Inf)")
    return a


@dataclass(frozen=True)
class ControlPairs:
    """Matched source/target control points driving one warp.

    sources and targets are (n, 2) float64 arrays of equal length n >= 3.
    """

    sources: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        src = _as_points(self.sources)
        tgt = _as_points(self.targets)
        if len(src) != len(tgt):
            raise ValidationError(
                f"source/target length mismatch: {len(src)} vs {len(tgt)}"
            )
        if len(src) < 3:
            raise ValidationError(f"need at least 3 control pairs, got {len(src)}")
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "targets", tgt)

    def __len__(self) -> int:
        return len(self.sources)


@dataclass(frozen=True)
class TpsTransform:
    """Fitted thin-plate-spline map.

    sources: (n, 2) control points the kernel terms are centred on.
    weights: (n, 2) radial-basis coefficients, one column per output axis.
    affine:  (2, 3) matrix; columns are (constant, x, y) terms.
    lam:     regularization strength used for the fit.
    """

    sources: np.ndarray
    weights: np.ndarray
    affine: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        src = _as_points(self.sources)
        w = np.asarray(self.weights, dtype=np.float64)
        a = np.asarray(self.affine, dtype=np.float64)
        if w.shape != src.shape:
            raise ValidationError(f"weights shape {w.shape} != sources {src.shape}")
        if a.shape != (2, 3):
            raise ValidationError(f"affine must be (2, 3), got {a.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a))):
            raise ValidationError("coefficients must be finite")
        # Side conditions keep the transform affine at infinity.
        scale = max(1.0, float(np.abs(src).max()), float(np.abs(w).max()))
        moments = np.concatenate([w.sum(axis=0), (src.T @ w).ravel()])
        if np.abs(moments).max() > _SIDE_CONDITION_TOL * scale * max(1.0, len(src)):
            raise ValidationError("weights violate thin-plate side conditions")
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "affine", a)
        object.__setattr__(self, "lam", float(self.lam))

    def __call__(self, points):
        return evaluate(self, points)


def kernel(r2: np.ndarray) -> np.ndarray:
    """Radial kernel U(r) = r^2 log r expressed on squared distances.

    U = 0.5 * r2 * log(r2), with U(0) = 0.
    """
    r2 = np.asarray(r2, dtype=np.float64)
    out = np.zeros_like(r2)
    nz = r2 > 0.0
    out[nz] = 0.5 * r2[nz] * np.log(r2[nz])
    return out


def _kernel_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return kernel(d2)


def _check_degenerate(src: np.ndarray, lam: float) -> None:
    scale = max(1.0, float(np.abs(src).max()))
    if lam == 0.0:
        d2 = ((src[:, None, :] - src[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if d2.min() < (_DUPLICATE_RTOL * scale) ** 2:
            raise SingularFitError(
                "singular fit: duplicate source points with lambda = 0"
            )
    centered = src - src.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= _COLLINEAR_RTOL * max(sv[0], scale):
        raise SingularFitError("singular fit: source points are collinear")


def fit_tps(pairs: ControlPairs, lam: float = 0.0) -> TpsTransform:
    """Fit a thin-plate spline mapping ``pairs.sources`` onto ``pairs.targets``.

    Raises SingularFitError for collinear sources, or duplicate sources at
    lam = 0; raises ValidationError for a negative lam.
    """
    if not isinstance(pairs, ControlPairs):
        pairs = ControlPairs(*pairs)
    if lam < 0.0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")

    src, tgt = pairs.sources, pairs.targets
    n = len(src)
    _check_degenerate(src, lam)

    k = _kernel_matrix(src, src)
    if lam > 0.0:
        k = k + lam * np.eye(n)
    p = np.hstack([np.ones((n, 1)), src])

    lhs = np.zeros((n + 3, n + 3))
    lhs[:n, :n] = k
    lhs[:n, n:] = p
    lhs[n:, :n] = p.T
    rhs = np.vstack([tgt, np.zeros((3, 2))])

    try:
        sol = scipy.linalg.solve(lhs, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularFitError(f"singular fit: {exc}") from exc

    # Backstop: a solver can return garbage on near-singular systems
    # without raising.  Never let that escape silently.
    residual = np.abs(lhs @ sol - rhs).max()
    scale = max(1.0, float(np.abs(tgt).max()), float(np.abs(src).max()))
    if not np.isfinite(sol).all() or residual > 1e-6 * scale:
        raise SingularFitError("singular fit: ill-conditioned system")

    return TpsTransform(
        sources=src, weights=sol[:n], affine=sol[n:].T, lam=float(lam)
    )


def evaluate(t: TpsTransform, points) -> np.ndarray:
    """Apply the transform to one point (shape (2,)) or many (shape (n, 2)).

    Returns an array of the same shape as the input.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = _as_points(pts)
    u = _kernel_matrix(pts, t.sources)
    out = t.affine[:, 0] + pts @ t.affine[:, 1:].T + u @ t.weights
    return out[0] if single else out


def bending_energy(t: TpsTransform) -> float:
    """Total bending energy w^T K w, summed over both output coordinates.

    Zero (up to rounding) exactly when the transform is affine.
    """
    k = _kernel_matrix(t.sources, t.sources)
    return float(np.einsum("ic,ij,jc->", t.weights, k, t.weights))
