import json

import numpy as np
import pytest

from spillseg.core.errors import ConfigError, DataError
from spillseg.data.dataset import (
    MANIFEST_NAME,
    DatasetEntry,
    DatasetManifest,
    load_or_create_manifest,
    load_split,
    read_manifest,
    scan_dataset,
    split_dataset,
    train_count,
    write_manifest,
)
from spillseg.infra.imageio import save_mask, save_tile


def _entries(n):
    return [DatasetEntry(f"images/s{i:04d}.png", f"masks/s{i:04d}.png") for i in range(n)]


def _write_pair(root, stem, size=8, value=0.5):
    save_tile(root / "images" / f"{stem}.png", np.full((size, size), value))
    mask = np.zeros((size, size))
    mask[: size // 2] = 1
    save_mask(root / "masks" / f"{stem}.png", mask)


def test_ten_entries_split_eight_two():
    manifest = split_dataset(_entries(10), 0.8, seed=1)

    assert manifest.counts() == {"train": 8, "test": 2}


def test_large_split_uses_ceiling_rule():
    assert train_count(8070, 0.8) == 6456
    assert train_count(10, 0.8) == 8
    assert train_count(2, 0.99) == 1
    assert train_count(2, 0.01) == 1


def test_split_is_deterministic_disjoint_and_exhaustive():
    a = split_dataset(_entries(25), 0.7, seed=5)
    b = split_dataset(list(reversed(_entries(25))), 0.7, seed=5)

    assert a.entries == b.entries
    train = {e.stem for e in a.split("train")}
    test = {e.stem for e in a.split("test")}
    assert not train & test
    assert len(train | test) == 25


def test_split_rejects_bad_input():
    with pytest.raises(DataError, match="empty"):
        split_dataset([], 0.8)
    with pytest.raises(DataError, match="at least 2"):
        split_dataset(_entries(1), 0.8)
    with pytest.raises(ConfigError):
        split_dataset(_entries(4), 1.0)


def test_split_accepts_path_pairs():
    manifest = split_dataset([("images/a.png", "masks/a.png"), ("images/b.png", "masks/b.png")])

    assert [e.stem for e in manifest.entries] == ["a", "b"]
    assert manifest.counts() == {"train": 1, "test": 1}


def test_unknown_split_tag_is_rejected():
    with pytest.raises(ConfigError, match="unknown split"):
        split_dataset(_entries(4)).split("val")


def test_manifest_round_trip(tmp_path):
    manifest = split_dataset(_entries(6), 0.5, seed=9)

    write_manifest(tmp_path, manifest)
    loaded = read_manifest(tmp_path)

    assert loaded.entries == manifest.entries
    assert (loaded.seed, loaded.split_ratio) == (9, 0.5)


def test_manifest_errors_are_data_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        read_manifest(tmp_path)

    (tmp_path / MANIFEST_NAME).write_text("{", encoding="utf-8")
    with pytest.raises(DataError, match="invalid JSON"):
        read_manifest(tmp_path)

    bad_entry = {"image": "images/a.png", "mask": "masks/a.png", "split": "val"}
    doc = {"version": 1, "seed": 0, "split_ratio": 0.8, "entries": [bad_entry]}
    (tmp_path / MANIFEST_NAME).write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(DataError, match="entries.0.split"):
        read_manifest(tmp_path)


def test_scan_pairs_images_with_masks(tmp_path):
    for stem in ("b", "a"):
        _write_pair(tmp_path, stem)

    entries = scan_dataset(tmp_path)

    assert [(e.image, e.mask) for e in entries] == [
        ("images/a.png", "masks/a.png"),
        ("images/b.png", "masks/b.png"),
    ]


def test_scan_rejects_unpaired_files(tmp_path):
    _write_pair(tmp_path, "a")
    save_tile(tmp_path / "images" / "lonely.png", np.zeros((8, 8)))

    with pytest.raises(DataError, match="without mask: lonely"):
        scan_dataset(tmp_path)


def test_load_or_create_reuses_existing_manifest(tmp_path):
    for stem in "abcd":
        _write_pair(tmp_path, stem)

    first = load_or_create_manifest(tmp_path, 0.5, seed=2)
    second = load_or_create_manifest(tmp_path, 0.75, seed=8)

    assert (tmp_path / MANIFEST_NAME).exists()
    assert second.entries == first.entries
    assert second.split_ratio == 0.5


def test_load_split_stacks_and_resizes(tmp_path):
    for stem in "abcd":
        _write_pair(tmp_path, stem, size=8)
    manifest = load_or_create_manifest(tmp_path, 0.5, seed=0)

    tiles = load_split(tmp_path, manifest, "train", tile_size=16, workers=2)

    assert len(tiles) == 2
    assert tiles.images.shape == (2, 1, 16, 16)
    assert set(np.unique(tiles.masks)) <= {0.0, 1.0}
    assert tiles.stems == [e.stem for e in manifest.split("train")]


def test_load_split_rejects_mixed_sizes_without_tile_size(tmp_path):
    _write_pair(tmp_path, "a", size=8)
    _write_pair(tmp_path, "b", size=16)
    both_train = DatasetManifest(
        entries=[DatasetEntry(e.image, e.mask, "train") for e in scan_dataset(tmp_path)], seed=0
    )

    with pytest.raises(DataError, match="differing sizes"):
        load_split(tmp_path, both_train, "train")
