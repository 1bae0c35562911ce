import copy
import json

import numpy as np
import pytest

from spillseg.config.schema.validator import validate_global_config
from spillseg.config.settings import get_settings

# Small widths keep CLI and trainer tests at a fraction of a second per epoch.
TINY_CONFIG = {
    "segnet": {"stage_channels": [2, 4], "out_channels": 2},
    "deeplab": {
        "dilation_rates": [1, 2],
        "branch_channels": 2,
        "entry_channels": 2,
        "output_stride": 4,
        "out_channels": 2,
    },
    "fusion": {"r": 2},
    "train": {"epochs": 2, "batch_size": 4, "lr0": 0.001, "seed": 3},
    "data": {"tile_size": 16, "scene": {"size": 16}},
}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs (set SPILLSEG_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    get_settings.cache_clear()
    if get_settings().run_slow:
        return
    skip_slow = pytest.mark.skip(reason="set SPILLSEG_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    monkeypatch.delenv("SPILLSEG_CONFIG", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_raw():
    return copy.deepcopy(TINY_CONFIG)


@pytest.fixture
def tiny_config():
    return validate_global_config(TINY_CONFIG)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tiny_raw_factory():
    return lambda: copy.deepcopy(TINY_CONFIG)
