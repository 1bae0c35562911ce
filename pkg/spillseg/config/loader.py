"""Load the global configuration from a single canonical source.

Canonical source:
- packaged defaults (`spillseg/config/defaults/default.json`)

Optional override (explicit only):
- a path passed on the command line, or `SPILLSEG_CONFIG`
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import yaml

from spillseg.config.schema.models import GlobalConfig
from spillseg.config.schema.validator import validate_global_config
from spillseg.config.settings import get_settings
from spillseg.core.errors import ConfigError

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "config.resolved.json"


def _module_defaults_path() -> Path:
    return Path(__file__).resolve().parent / "defaults" / "default.json"


def _read_document(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None

    if path.suffix.lower() in {".yaml", ".yml"}:
        try:
            return yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None

    try:
        return json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def resolve_config_path(path: str | Path | None) -> Path:
    if path is not None:
        return Path(path)
    override = get_settings().config_path
    if override:
        return Path(override)
    return _module_defaults_path()


def load_global_config(path: str | Path | None = None) -> GlobalConfig:
    """Read, merge with defaults and validate a JSON or YAML config file."""
    source = resolve_config_path(path)
    logger.debug("loading config from %s", source)
    return validate_global_config(_read_document(source))


def config_to_dict(config: GlobalConfig) -> dict:
    return config.model_dump(mode="json")


def dump_resolved_config(config: GlobalConfig, directory: str | Path) -> Path:
    """Write the fully resolved configuration next to a command's outputs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / RESOLVED_CONFIG_NAME
    target.write_text(
        json.dumps(config_to_dict(config), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return target
