"""Hybrid binary cross-entropy + soft Dice objective."""

from __future__ import annotations

import numpy as np

from spillseg.config.schema.models import LossConfig
from spillseg.core.errors import ShapeError

_DEFAULT = LossConfig()


def _pair(p, g) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeError(f"prediction shape {p.shape} does not match target shape {g.shape}")
    return p, g


def _per_item(x: np.ndarray) -> np.ndarray:
    """Flatten to (items, pixels); rank-4 tensors keep their batch axis."""
    if x.ndim == 4:
        return x.reshape(x.shape[0], -1)
    return x.reshape(1, -1)


def bce_loss(p, g, cfg: LossConfig | None = None) -> float:
    cfg = cfg or _DEFAULT
    p, g = _pair(p, g)
    eps = cfg.prob_clamp
    pc = np.clip(p, eps, 1.0 - eps)
    return float(np.mean(-(g * np.log(pc) + (1.0 - g) * np.log1p(-pc))))


def bce_grad(p, g, cfg: LossConfig | None = None) -> np.ndarray:
    cfg = cfg or _DEFAULT
    p, g = _pair(p, g)
    eps = cfg.prob_clamp
    pc = np.clip(p, eps, 1.0 - eps)
    grad = (-g / pc + (1.0 - g) / (1.0 - pc)) / p.size
    # the clamp is flat outside [eps, 1 - eps]
    return np.where((p >= eps) & (p <= 1.0 - eps), grad, 0.0)


def dice_loss(p, g, cfg: LossConfig | None = None) -> float:
    cfg = cfg or _DEFAULT
    p, g = _pair(p, g)
    pi, gi = _per_item(p), _per_item(g)
    smooth = cfg.dice_smooth
    overlap = 2.0 * np.sum(pi * gi, axis=1) + smooth
    denom = np.sum(pi, axis=1) + np.sum(gi, axis=1) + smooth
    return float(np.mean(1.0 - overlap / denom))


def dice_grad(p, g, cfg: LossConfig | None = None) -> np.ndarray:
    cfg = cfg or _DEFAULT
    p, g = _pair(p, g)
    pi, gi = _per_item(p), _per_item(g)
    smooth = cfg.dice_smooth
    overlap = (2.0 * np.sum(pi * gi, axis=1) + smooth)[:, None]
    denom = (np.sum(pi, axis=1) + np.sum(gi, axis=1) + smooth)[:, None]
    grad = -(2.0 * gi * denom - overlap) / denom**2 / pi.shape[0]
    return grad.reshape(p.shape)


def total_loss(p, g, cfg: LossConfig | None = None) -> float:
    cfg = cfg or _DEFAULT
    a = cfg.alpha
    return a * bce_loss(p, g, cfg) + (1.0 - a) * dice_loss(p, g, cfg)


def total_loss_grad(p, g, cfg: LossConfig | None = None) -> np.ndarray:
    cfg = cfg or _DEFAULT
    a = cfg.alpha
    return a * bce_grad(p, g, cfg) + (1.0 - a) * dice_grad(p, g, cfg)


def loss_and_grad(p, g, cfg: LossConfig | None = None) -> tuple[float, np.ndarray]:
    return total_loss(p, g, cfg), total_loss_grad(p, g, cfg)
