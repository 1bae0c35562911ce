"""Config schema validation helpers."""

from __future__ import annotations

from pydantic import ValidationError

from spillseg.config.schema.models import GlobalConfig
from spillseg.core.errors import ConfigError


def _format_location(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_global_config(raw) -> GlobalConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be an object")

    try:
        return GlobalConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = _format_location(first.get("loc", ()))
        if first.get("type") == "extra_forbidden":
            raise ConfigError(f"unknown config key: {location}") from None
        raise ConfigError(f"invalid config at {location}: {first['msg']}") from None
