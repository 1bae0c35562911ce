"""Process-level runtime settings read from the environment."""

from dataclasses import dataclass
from functools import lru_cache
import logging
import os

_LOG_LEVELS = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}


def _parse_bool(value: str | None, *, default: bool) -> bool:
    if value is None:
        return default
    normalized = value.strip().lower()
    if normalized in {"1", "true", "yes", "on"}:
        return True
    if normalized in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"Invalid boolean value: {value}")


@dataclass(frozen=True)
class Settings:
    log_level: str
    workers: int
    config_path: str | None = None
    run_slow: bool = False

    @property
    def log_level_number(self) -> int:
        return getattr(logging, self.log_level)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    log_level = os.getenv("SPILLSEG_LOG_LEVEL", "INFO").strip().upper()
    if log_level not in _LOG_LEVELS:
        raise ValueError(f"Invalid SPILLSEG_LOG_LEVEL: {log_level}")

    workers = int(os.getenv("SPILLSEG_WORKERS", "4"))
    if workers < 1:
        raise ValueError("SPILLSEG_WORKERS must be >= 1")

    return Settings(
        log_level=log_level,
        workers=workers,
        config_path=os.getenv("SPILLSEG_CONFIG") or None,
        run_slow=_parse_bool(os.getenv("SPILLSEG_RUN_SLOW"), default=False),
    )
