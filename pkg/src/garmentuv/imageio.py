"""PNG read/write helpers (thin wrappers over Pillow)."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def read_rgba(path) -> np.ndarray:
    """Read an image file as (H, W, 4) uint8."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8)


def read_gray(path) -> np.ndarray:
    """Read a single-channel image file as (H, W) uint8."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def write_png(path, array: np.ndarray) -> None:
    """Write (H, W), (H, W, 3) or (H, W, 4) uint8 arrays as PNG, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    Image.fromarray(np.ascontiguousarray(array)).save(tmp, format="PNG")
    tmp.replace(path)


def encode_png(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8)
