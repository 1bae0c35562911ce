"""Dataset layout, train/test manifests and in-memory tile sets.

Layout on disk::

    <root>/images/<stem>.png
    <root>/masks/<stem>.png
    <root>/manifest.json
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from spillseg.core.errors import ConfigError, DataError
from spillseg.infra.imageio import load_mask, load_tile, resize_tile

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
IMAGES_DIR = "images"
MASKS_DIR = "masks"
SPLITS = ("train", "test")
IMAGE_SUFFIXES = {".png", ".pgm"}


@dataclass(frozen=True)
class DatasetEntry:
    image: str
    mask: str
    split: str = "train"

    @property
    def stem(self) -> str:
        return Path(self.image).stem


@dataclass
class DatasetManifest:
    entries: list[DatasetEntry]
    seed: int
    split_ratio: float = 0.8

    def split(self, tag: str) -> list[DatasetEntry]:
        if tag not in SPLITS:
            raise ConfigError(f"unknown split '{tag}' (expected one of {', '.join(SPLITS)})")
        return [e for e in self.entries if e.split == tag]

    def counts(self) -> dict[str, int]:
        return {tag: len(self.split(tag)) for tag in SPLITS}


# ── Manifest document ─────────────────────────────────────────────────────────


class _EntryDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image: str
    mask: str
    split: Literal["train", "test"]


class _ManifestDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int
    seed: int
    split_ratio: float
    entries: list[_EntryDocument]


def write_manifest(root: str | Path, manifest: DatasetManifest) -> Path:
    doc = _ManifestDocument(
        version=MANIFEST_VERSION,
        seed=manifest.seed,
        split_ratio=manifest.split_ratio,
        entries=[_EntryDocument(image=e.image, mask=e.mask, split=e.split) for e in manifest.entries],
    )
    path = Path(root) / MANIFEST_NAME
    path.write_text(json.dumps(doc.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(root: str | Path) -> DatasetManifest:
    path = Path(root) / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    try:
        doc = _ManifestDocument.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise DataError(f"{path}: invalid manifest at {loc}: {first['msg']}") from None
    if doc.version != MANIFEST_VERSION:
        raise DataError(f"{path}: unsupported manifest version {doc.version}")
    return DatasetManifest(
        entries=[DatasetEntry(e.image, e.mask, e.split) for e in doc.entries],
        seed=doc.seed,
        split_ratio=doc.split_ratio,
    )


# ── Scanning and splitting ────────────────────────────────────────────────────


def _stems(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise DataError(f"{directory}: directory not found")
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    }


def scan_dataset(root: str | Path) -> list[DatasetEntry]:
    """Pair ``images/<stem>`` with ``masks/<stem>``; unpaired files are rejected."""
    root = Path(root)
    images = _stems(root / IMAGES_DIR)
    masks = _stems(root / MASKS_DIR)
    if not images:
        raise DataError(f"{root / IMAGES_DIR}: no images found")

    missing_masks = sorted(set(images) - set(masks))
    if missing_masks:
        raise DataError(f"{root}: image(s) without mask: {', '.join(missing_masks[:5])}")
    orphan_masks = sorted(set(masks) - set(images))
    if orphan_masks:
        raise DataError(f"{root}: mask(s) without image: {', '.join(orphan_masks[:5])}")

    return [
        DatasetEntry(
            image=images[stem].relative_to(root).as_posix(),
            mask=masks[stem].relative_to(root).as_posix(),
        )
        for stem in sorted(images)
    ]


def train_count(n: int, ratio: float) -> int:
    """First ceil(ratio * n) items train; both splits keep at least one item."""
    n_train = math.ceil(ratio * n - 1e-9)
    return min(max(n_train, 1), n - 1)


def split_dataset(entries: Iterable, ratio: float = 0.8, seed: int = 0) -> DatasetManifest:
    """Deterministic seeded shuffle, then tag the first share as train.

    *entries* holds DatasetEntry objects or (image, mask) pairs. The returned
    manifest lists entries sorted by stem.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    items = [
        e if isinstance(e, DatasetEntry) else DatasetEntry(str(e[0]), str(e[1]))
        for e in entries
    ]
    if not items:
        raise DataError("cannot split an empty dataset")
    if len(items) < 2:
        raise DataError("a train/test split needs at least 2 entries")

    items.sort(key=lambda e: (e.stem, e.image))
    order = np.random.default_rng(seed).permutation(len(items))
    n_train = train_count(len(items), ratio)
    train_positions = set(int(i) for i in order[:n_train])
    tagged = [
        DatasetEntry(e.image, e.mask, "train" if i in train_positions else "test")
        for i, e in enumerate(items)
    ]
    return DatasetManifest(entries=tagged, seed=seed, split_ratio=ratio)


def load_or_create_manifest(root: str | Path, ratio: float = 0.8, seed: int = 0) -> DatasetManifest:
    root = Path(root)
    if (root / MANIFEST_NAME).exists():
        return read_manifest(root)
    manifest = split_dataset(scan_dataset(root), ratio, seed)
    write_manifest(root, manifest)
    logger.info("wrote %s (%s)", root / MANIFEST_NAME, manifest.counts())
    return manifest


# ── Tile sets ─────────────────────────────────────────────────────────────────


@dataclass
class TileSet:
    images: np.ndarray
    masks: np.ndarray
    stems: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, indices: Sequence[int]) -> "TileSet":
        idx = np.asarray(indices, dtype=np.int64)
        return TileSet(self.images[idx], self.masks[idx], [self.stems[i] for i in idx])


def _load_pair(root: Path, entry: DatasetEntry, tile_size: int | None):
    image = load_tile(root / entry.image)
    mask = load_mask(root / entry.mask)
    if image.shape != mask.shape:
        raise DataError(
            f"{entry.stem}: image shape {image.shape[2:]} does not match mask {mask.shape[2:]}"
        )
    if tile_size is not None and image.shape[2:] != (tile_size, tile_size):
        image = resize_tile(image, tile_size)
        mask = (resize_tile(mask, tile_size) >= 0.5).astype(np.float64)
    return image, mask


def load_split(
    root: str | Path,
    manifest: DatasetManifest,
    split: str,
    tile_size: int | None = None,
    workers: int = 4,
) -> TileSet:
    root = Path(root)
    entries = manifest.split(split)
    if not entries:
        raise DataError(f"{root}: split '{split}' is empty")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        pairs = list(executor.map(lambda e: _load_pair(root, e, tile_size), entries))
    shapes = {img.shape for img, _ in pairs}
    if len(shapes) > 1:
        raise DataError(f"{root}: tiles in split '{split}' have differing sizes; set data.tile_size")
    return TileSet(
        images=np.concatenate([img for img, _ in pairs], axis=0),
        masks=np.concatenate([m for _, m in pairs], axis=0),
        stems=[e.stem for e in entries],
    )
