"""Single-cycle cosine annealing."""

from __future__ import annotations

import math

from spillseg.config.schema.models import TrainConfig
from spillseg.core.errors import ConfigError


def cosine_lr(epoch: int, cfg: TrainConfig) -> float:
    if not 0 <= epoch < cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside 0..{cfg.epochs - 1}")
    if cfg.epochs == 1:
        return cfg.lr0
    if epoch == cfg.epochs - 1:
        return cfg.lr_min
    phase = math.pi * epoch / (cfg.epochs - 1)
    return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + math.cos(phase))
