"""Synthetic speckled SAR scenes with oil-slick masks and ship-wake look-alikes.

A scene is a smooth sea background, darkened inside random ellipses
(slicks, recorded in the mask) and along thin line segments (wakes, not in
the mask), multiplied by L-look Gamma speckle and clamped to [0, 1].
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from spillseg.config.schema.models import SceneSpec
from spillseg.core.errors import ConfigError
from spillseg.data.dataset import (
    IMAGES_DIR,
    MASKS_DIR,
    DatasetEntry,
    DatasetManifest,
    split_dataset,
    write_manifest,
)
from spillseg.infra.imageio import save_mask, save_tile

logger = logging.getLogger(__name__)

# background modulation amplitude around background_level
FIELD_AMPLITUDE = 0.1
SLICK_AXIS_RANGE = (0.08, 0.22)
MIN_SLICK_AXIS = 1.5
WAKE_LENGTH_RANGE = (0.3, 0.7)


@dataclass(frozen=True)
class Ellipse:
    cy: float
    cx: float
    a: float
    b: float
    angle: float

    def contains(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        dy, dx = yy - self.cy, xx - self.cx
        c, s = np.cos(self.angle), np.sin(self.angle)
        u = (dx * c + dy * s) / self.a
        v = (-dx * s + dy * c) / self.b
        return u * u + v * v <= 1.0


@dataclass(frozen=True)
class Wake:
    y0: float
    x0: float
    y1: float
    x1: float
    width: int

    def covers(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        """Pixels whose centre lies within width / 2 of the segment."""
        dy, dx = self.y1 - self.y0, self.x1 - self.x0
        length2 = dy * dy + dx * dx
        if length2 == 0.0:
            t = np.zeros_like(yy)
        else:
            t = np.clip(((yy - self.y0) * dy + (xx - self.x0) * dx) / length2, 0.0, 1.0)
        py, px = self.y0 + t * dy, self.x0 + t * dx
        return (yy - py) ** 2 + (xx - px) ** 2 <= (self.width / 2.0) ** 2


@dataclass
class SyntheticScene:
    image: np.ndarray
    mask: np.ndarray
    clean: np.ndarray
    background: np.ndarray
    wake_mask: np.ndarray
    slicks: list[Ellipse] = field(default_factory=list)
    wakes: list[Wake] = field(default_factory=list)


def smooth_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency field normalised to [-1, 1]."""
    noise = rng.standard_normal((size, size))
    smooth = gaussian_filter(noise, sigma=size / 8.0, mode="wrap")
    peak = float(np.max(np.abs(smooth)))
    return smooth / peak if peak > 0 else smooth


def speckle_field(shape, looks: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative speckle ~ Gamma(L, 1/L): mean 1, variance 1/L."""
    if looks <= 0:
        raise ConfigError("speckle looks must be > 0")
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def _sample_slick(size: int, rng: np.random.Generator) -> Ellipse:
    lo, hi = SLICK_AXIS_RANGE
    cy, cx = rng.uniform(0.15 * size, 0.85 * size, size=2)
    a, b = np.maximum(rng.uniform(lo * size, hi * size, size=2), MIN_SLICK_AXIS)
    return Ellipse(float(cy), float(cx), float(a), float(b), float(rng.uniform(0.0, np.pi)))


def _sample_wake(size: int, rng: np.random.Generator) -> Wake:
    lo, hi = WAKE_LENGTH_RANGE
    y0, x0 = rng.uniform(0.0, size - 1, size=2)
    length = rng.uniform(lo * size, hi * size)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    width = int(rng.integers(1, 3))
    return Wake(
        float(y0),
        float(x0),
        float(y0 + length * np.sin(theta)),
        float(x0 + length * np.cos(theta)),
        width,
    )


def render_scene(spec: SceneSpec, rng: np.random.Generator) -> SyntheticScene:
    size = spec.size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    background = spec.background_level * (1.0 + FIELD_AMPLITUDE * smooth_field(size, rng))

    lo, hi = spec.slick_count_range
    slicks = [_sample_slick(size, rng) for _ in range(int(rng.integers(lo, hi + 1)))]
    mask = np.zeros((size, size), dtype=bool)
    for slick in slicks:
        mask |= slick.contains(yy, xx)

    lo, hi = spec.wake_count_range
    wakes = [_sample_wake(size, rng) for _ in range(int(rng.integers(lo, hi + 1)))]
    wake_mask = np.zeros((size, size), dtype=bool)
    for wake in wakes:
        wake_mask |= wake.covers(yy, xx)
    wake_mask &= ~mask

    clean = background.copy()
    clean[mask] *= spec.slick_darkening
    clean[wake_mask] *= spec.wake_darkening

    image = np.clip(clean * speckle_field((size, size), spec.speckle_looks, rng), 0.0, 1.0)
    return SyntheticScene(
        image=image,
        mask=mask.astype(np.float64),
        clean=clean,
        background=background,
        wake_mask=wake_mask,
        slicks=slicks,
        wakes=wakes,
    )


def synth_scene(spec: SceneSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """(image, mask), both shaped (1, 1, size, size)."""
    scene = render_scene(spec, rng)
    return scene.image[None, None], scene.mask[None, None]


def scene_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per item, so generation order does not matter."""
    return np.random.default_rng([seed, index])


def scene_stem(index: int) -> str:
    return f"scene_{index:05d}"


def generate_dataset(
    root: str | Path,
    count: int,
    spec: SceneSpec,
    *,
    ratio: float = 0.8,
    workers: int = 4,
    on_item: Optional[Callable[[int], None]] = None,
) -> DatasetManifest:
    """Render *count* scenes into ``root`` and write the split manifest."""
    if count < 2:
        raise ConfigError(f"scene count must be >= 2 for a train/test split, got {count}")
    root = Path(root)
    (root / IMAGES_DIR).mkdir(parents=True, exist_ok=True)
    (root / MASKS_DIR).mkdir(parents=True, exist_ok=True)

    def _write(index: int) -> DatasetEntry:
        image, mask = synth_scene(spec, scene_rng(spec.seed, index))
        stem = scene_stem(index)
        save_tile(root / IMAGES_DIR / f"{stem}.png", image)
        save_mask(root / MASKS_DIR / f"{stem}.png", mask)
        return DatasetEntry(f"{IMAGES_DIR}/{stem}.png", f"{MASKS_DIR}/{stem}.png")

    entries: list[DatasetEntry] = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(_write, i): i for i in range(count)}
        for future in as_completed(futures):
            entries.append(future.result())
            if on_item is not None:
                on_item(futures[future])

    manifest = split_dataset(entries, ratio, spec.seed)
    write_manifest(root, manifest)
    logger.info("generated %d scenes in %s (%s)", count, root, manifest.counts())
    return manifest
