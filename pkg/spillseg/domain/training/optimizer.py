"""Adam with coupled L2 weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spillseg.config.schema.models import TrainConfig
from spillseg.core.errors import NumericError
from spillseg.core.tensor import ParamStore

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, params: ParamStore) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )


def adam_step(
    params: ParamStore,
    state: AdamState,
    lr_t: float,
    cfg: TrainConfig | None = None,
) -> None:
    """One in-place update of every parameter from its accumulated gradient.

    Gradients are checked before any parameter changes, so a rejected step
    leaves both parameters and moments untouched.
    """
    weight_decay = (cfg or TrainConfig()).weight_decay
    for name in params.names():
        if not np.all(np.isfinite(params.grad(name))):
            raise NumericError(f"non-finite gradient for parameter {name}")

    state.step += 1
    t = state.step
    correction1 = 1.0 - BETA1**t
    correction2 = 1.0 - BETA2**t
    for name, value in params.items():
        g = params.grad(name) + weight_decay * value
        m = state.m.setdefault(name, np.zeros_like(value))
        v = state.v.setdefault(name, np.zeros_like(value))
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        value -= lr_t * m_hat / (np.sqrt(v_hat) + EPS)
