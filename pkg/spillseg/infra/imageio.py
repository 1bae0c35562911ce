"""8-bit grayscale tile and mask files (PNG / PGM)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from spillseg.core.errors import DataError, ShapeError
from spillseg.core.ops import bilinear_resize
from spillseg.core.tensor import Tensor, as_tensor

MIN_TILE = 8


def _read_gray(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise DataError(f"{path}: expected 8-bit grayscale image, got mode {img.mode}")
            return np.asarray(img, dtype=np.uint8).copy()
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from None


def load_tile(path: str | Path) -> Tensor:
    """Pixel v -> v / 255, shaped (1, 1, h, w)."""
    pixels = _read_gray(path)
    return (pixels.astype(np.float64) / 255.0)[None, None]


def load_mask(path: str | Path) -> np.ndarray:
    """Binary mask (1, 1, h, w) of 0/1 floats; pixels above 127 are spill."""
    pixels = _read_gray(path)
    return (pixels > 127).astype(np.float64)[None, None]


def _plane(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim == 4:
        if arr.shape[:2] != (1, 1):
            raise ShapeError(f"expected a single-channel single tile, got shape {arr.shape}")
        arr = arr[0, 0]
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D plane, got shape {arr.shape}")
    return arr


def to_uint8(x) -> np.ndarray:
    return np.rint(np.clip(_plane(x), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_tile(path: str | Path, x) -> Path:
    """Write a [0, 1] tile as 8-bit grayscale, rounding 255 * v."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(x)).save(path)
    return path


def save_mask(path: str | Path, mask) -> Path:
    """Write a binary mask as {0, 255}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plane = (_plane(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(plane).save(path)
    return path


def resize_tile(x, target: int) -> Tensor:
    """Bilinear resampling to target x target (same convention as upsampling)."""
    if target < MIN_TILE:
        raise ShapeError(f"resize target {target} is below the minimum tile size {MIN_TILE}")
    x = as_tensor(x)
    if x.shape[2:] == (target, target):
        return x.copy()
    return bilinear_resize(x, target, target)
