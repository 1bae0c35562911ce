"""Long-running acceptance runs. Enabled with SPILLSEG_RUN_SLOW=1."""

import time
from pathlib import Path

import numpy as np
import pytest

from spillseg.config.loader import load_global_config
from spillseg.data.dataset import SPLITS, load_split, read_manifest
from spillseg.domain.diagnostics import run_gradcheck_suite
from spillseg.domain.evaluation import compare_false_alarms, evaluate_baseline, evaluate_model
from spillseg.infra.checkpoint import load_checkpoint
from spillseg.infra.reports import read_csv_rows
from spillseg.interfaces.cli.bootstrap import main
from spillseg.models.network import FusionSegmenter

OVERFIT_CONFIG = Path(__file__).resolve().parents[2] / "configs" / "overfit.json"

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def overfit_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("overfit")
    data, heldout, run = base / "data", base / "heldout", base / "run"
    assert main(["synth", "--out", str(data), "--count", "40", "--size", "64", "--seed", "7"]) == 0
    # scenes the checkpoint selection never saw
    assert main(["synth", "--out", str(heldout), "--count", "8", "--size", "64", "--seed", "8"]) == 0
    assert main(["train", "--config", str(OVERFIT_CONFIG), "--data", str(data), "--out", str(run)]) == 0
    return data, heldout, run


def _heldout_tiles(root, tile_size):
    manifest = read_manifest(root)
    parts = [load_split(root, manifest, split, tile_size) for split in SPLITS]
    return np.concatenate([p.images for p in parts]), np.concatenate([p.masks for p in parts])


def test_gradient_suite_passes_quickly():
    start = time.perf_counter()

    rows = run_gradcheck_suite(range(10))

    assert [row.name for row in rows if not row.passed] == []
    assert time.perf_counter() - start < 60.0


def test_overfit_reaches_train_iou(overfit_run):
    data, _, run = overfit_run

    assert main(["evaluate", "--checkpoint", str(run / "checkpoint"), "--data", str(data), "--split", "train"]) == 0

    assert float(read_csv_rows(run / "eval_train" / "metrics.csv")[0]["iou"]) >= 0.85


def test_overfit_generalises_to_heldout_scenes(overfit_run):
    _, heldout, run = overfit_run
    ckpt = load_checkpoint(run / "checkpoint")
    images, masks = _heldout_tiles(heldout, ckpt.config.data.tile_size)

    result = evaluate_model(ckpt.build_model(), ckpt.params, images, masks)

    assert result.report.iou >= 0.70


def test_model_raises_fewer_false_alarms_on_look_alikes(overfit_run):
    _, heldout, run = overfit_run
    ckpt = load_checkpoint(run / "checkpoint")
    images, masks = _heldout_tiles(heldout, ckpt.config.data.tile_size)
    if masks.reshape(len(masks), -1).any(axis=1).all():
        pytest.skip("held-out scenes all contain slicks")

    model = evaluate_model(ckpt.build_model(), ckpt.params, images, masks)
    cmp = compare_false_alarms(model, evaluate_baseline(images, masks))

    assert cmp.model_fpr_empty < cmp.baseline_fpr_empty


def test_full_size_forward_pass_is_fast():
    model = FusionSegmenter(load_global_config())
    params = model.init_params(0)
    x = np.random.default_rng(0).random((1, 1, 256, 256))

    start = time.perf_counter()
    prob = model.forward(x, params)

    assert time.perf_counter() - start < 2.0
    assert prob.shape == (1, 1, 256, 256)
