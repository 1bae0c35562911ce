import json

import numpy as np
import pytest

from spillseg.core.errors import CheckpointError
from spillseg.infra.checkpoint import (
    FORMAT_VERSION,
    MANIFEST_NAME,
    WEIGHTS_NAME,
    CheckpointMeta,
    load_checkpoint,
    save_checkpoint,
)
from spillseg.models.network import FusionSegmenter

META = CheckpointMeta(epoch=3, val_iou=0.625, seed=7)


@pytest.fixture
def saved(tiny_config, tmp_path):
    params = FusionSegmenter(tiny_config).init_params(4)
    save_checkpoint(tmp_path / "ckpt", params, tiny_config, META)
    return tmp_path / "ckpt", params


def test_reload_is_exact_to_float32(saved, tiny_config):
    directory, params = saved

    ckpt = load_checkpoint(directory)

    assert ckpt.params.names() == params.names()
    for name, value in params.items():
        restored = ckpt.params[name]
        assert restored.shape == value.shape
        assert np.array_equal(restored, value.astype(np.float32).astype(np.float64))
    assert ckpt.metadata == META
    assert ckpt.config == tiny_config


def test_save_load_save_is_byte_identical(saved, tmp_path):
    directory, _ = saved
    ckpt = load_checkpoint(directory)

    save_checkpoint(tmp_path / "again", ckpt.params, ckpt.config, ckpt.metadata)

    for name in (MANIFEST_NAME, WEIGHTS_NAME):
        assert (directory / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_manifest_lists_offsets_in_storage_order(saved):
    directory, params = saved

    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))

    assert manifest["format_version"] == FORMAT_VERSION
    assert [t["name"] for t in manifest["tensors"]] == params.names()
    offset = 0
    for entry in manifest["tensors"]:
        assert entry["offset"] == offset
        assert entry["nbytes"] == 4 * int(np.prod(entry["shape"]))
        offset += entry["nbytes"]
    assert (directory / WEIGHTS_NAME).stat().st_size == offset


def test_build_model_uses_stored_architecture(saved):
    directory, params = saved

    model = load_checkpoint(directory).build_model()

    assert sorted(model.init_params(0).names()) == params.names()


def test_truncated_blob_is_rejected(saved):
    directory, _ = saved
    weights = directory / WEIGHTS_NAME
    weights.write_bytes(weights.read_bytes()[:-1])

    with pytest.raises(CheckpointError, match="bytes"):
        load_checkpoint(directory)


def test_version_mismatch_is_rejected(saved):
    directory, _ = saved
    path = directory / MANIFEST_NAME
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["format_version"] = FORMAT_VERSION + 1
    path.write_text(json.dumps(doc), encoding="utf-8")

    with pytest.raises(CheckpointError, match="format version"):
        load_checkpoint(directory)


def test_shape_disagreement_with_architecture_is_rejected(saved):
    directory, _ = saved
    path = directory / MANIFEST_NAME
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["config"]["segnet"]["out_channels"] = 4
    doc["config"]["fusion"]["r"] = 2
    path.write_text(json.dumps(doc), encoding="utf-8")

    with pytest.raises(CheckpointError, match="architecture expects"):
        load_checkpoint(directory)


def test_missing_checkpoint_is_rejected(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "nowhere")
