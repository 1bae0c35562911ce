"""Paired geometric and contrast augmentation of image/mask tiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import rotate

from spillseg.config.schema.models import AugmentationConfig
from spillseg.core.errors import ShapeError


@dataclass(frozen=True)
class Transform:
    k: int = 0
    hflip: bool = False
    vflip: bool = False
    contrast: float = 1.0
    angle: float = 0.0

    @property
    def is_identity(self) -> bool:
        return (
            self.k % 4 == 0
            and not self.hflip
            and not self.vflip
            and self.contrast == 1.0
            and self.angle == 0.0
        )


def sample_transform(cfg: AugmentationConfig, rng: np.random.Generator) -> Transform:
    """Draw one transform; the same number of draws is consumed for any cfg."""
    k = int(rng.integers(0, 4))
    h = rng.random()
    v = rng.random()
    lo, hi = cfg.contrast_range
    u = float(rng.uniform(lo, hi))
    angle = float(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    return Transform(
        k=k if cfg.rotate_90s else 0,
        hflip=bool(h < cfg.hflip_p),
        vflip=bool(v < cfg.vflip_p),
        contrast=u,
        angle=angle,
    )


def apply_geometry(arr: np.ndarray, t: Transform) -> np.ndarray:
    """Rotation by k * 90 degrees then flips, on the last two axes."""
    out = np.rot90(arr, t.k, axes=(-2, -1)) if t.k % 4 else arr
    if t.hflip:
        out = out[..., ::-1]
    if t.vflip:
        out = out[..., ::-1, :]
    return np.ascontiguousarray(out)


def apply_transform(image, mask, t: Transform) -> tuple[np.ndarray, np.ndarray]:
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask)
    if image.shape[-2:] != mask.shape[-2:]:
        raise ShapeError(
            f"image spatial size {image.shape[-2:]} does not match mask {mask.shape[-2:]}"
        )
    image = apply_geometry(image, t)
    mask = apply_geometry(mask, t)
    if t.angle:
        image = rotate(image, t.angle, axes=(-1, -2), reshape=False, order=1, mode="reflect")
        mask = rotate(mask, t.angle, axes=(-1, -2), reshape=False, order=0, mode="constant")
    image = np.clip(image * t.contrast, 0.0, 1.0)
    return image, mask


def augment(image, mask, cfg: AugmentationConfig, rng: np.random.Generator):
    return apply_transform(image, mask, sample_transform(cfg, rng))


def augment_batch(images, masks, cfg: AugmentationConfig, rng: np.random.Generator):
    """Independent transform per batch item."""
    out_images = np.empty_like(np.asarray(images, dtype=np.float64))
    out_masks = np.empty_like(np.asarray(masks))
    for i in range(out_images.shape[0]):
        out_images[i], out_masks[i] = augment(images[i], masks[i], cfg, rng)
    return out_images, out_masks
