import logging

import pytest

from spillseg.config.settings import _parse_bool, get_settings


def setup_function():
    get_settings.cache_clear()


def teardown_function():
    get_settings.cache_clear()


def test_runtime_settings_load_defaults(monkeypatch):
    monkeypatch.delenv("SPILLSEG_LOG_LEVEL", raising=False)
    monkeypatch.delenv("SPILLSEG_WORKERS", raising=False)
    monkeypatch.delenv("SPILLSEG_CONFIG", raising=False)
    monkeypatch.delenv("SPILLSEG_RUN_SLOW", raising=False)

    settings = get_settings()

    assert settings.log_level == "INFO"
    assert settings.log_level_number == logging.INFO
    assert settings.workers == 4
    assert settings.config_path is None
    assert settings.run_slow is False


def test_runtime_settings_env_override(monkeypatch):
    monkeypatch.setenv("SPILLSEG_LOG_LEVEL", "debug")
    monkeypatch.setenv("SPILLSEG_WORKERS", "2")
    monkeypatch.setenv("SPILLSEG_CONFIG", "/tmp/run.yaml")
    monkeypatch.setenv("SPILLSEG_RUN_SLOW", "yes")

    settings = get_settings()

    assert settings.log_level == "DEBUG"
    assert settings.workers == 2
    assert settings.config_path == "/tmp/run.yaml"
    assert settings.run_slow is True


def test_runtime_settings_reject_unknown_log_level(monkeypatch):
    monkeypatch.setenv("SPILLSEG_LOG_LEVEL", "chatty")

    with pytest.raises(ValueError, match="SPILLSEG_LOG_LEVEL"):
        get_settings()


def test_runtime_settings_reject_zero_workers(monkeypatch):
    monkeypatch.setenv("SPILLSEG_WORKERS", "0")

    with pytest.raises(ValueError, match="SPILLSEG_WORKERS"):
        get_settings()


def test_parse_bool_accepts_common_spellings():
    assert _parse_bool("On", default=False) is True
    assert _parse_bool(" 0 ", default=True) is False
    assert _parse_bool(None, default=True) is True
    with pytest.raises(ValueError):
        _parse_bool("maybe", default=False)


def test_slow_tests_are_gated_by_runtime_settings(request):
    slow = [item for item in request.session.items if "slow" in item.keywords]
    skipped = [item for item in slow if item.get_closest_marker("skip") is not None]

    assert skipped == ([] if get_settings().run_slow else slow)
