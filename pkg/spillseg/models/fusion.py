"""Channel-attention fusion of branch feature maps and the probability head.

The gate is ``Mc = sigmoid(W2 . relu(W1 . gap(Z)))`` over the concatenated
features ``Z``; the reweighted features go through a 1x1 convolution and a
sigmoid to give the per-pixel spill probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spillseg.config.schema.models import FusionConfig
from spillseg.core.errors import ConfigError, ShapeError
from spillseg.core.ops import ChannelScale, GlobalAvgPool, Linear, ReLU, Sigmoid
from spillseg.core.tensor import ParamStore, Tensor, as_tensor
from spillseg.models.base import ConvStep, add_conv

W1_NAME = "fusion.attention.w1"
W2_NAME = "fusion.attention.w2"
HEAD_NAME = "fusion.head"


@dataclass(frozen=True)
class AttentionParams:
    w1: np.ndarray
    w2: np.ndarray
    r: int = 4

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w1.ndim != 2 or w2.ndim != 2:
            raise ShapeError("attention weights must be matrices")
        channels = w1.shape[1]
        if channels % self.r:
            raise ConfigError(f"channel count {channels} is not divisible by r={self.r}")
        hidden = channels // self.r
        if w1.shape != (hidden, channels):
            raise ShapeError(f"W1 has shape {w1.shape}, expected {(hidden, channels)}")
        if w2.shape != (channels, hidden):
            raise ShapeError(f"W2 has shape {w2.shape}, expected {(channels, hidden)}")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


def check_reduction(channels: int, r: int) -> int:
    if r < 1 or channels % r:
        raise ConfigError(f"fused channel count {channels} is not divisible by r={r}")
    return channels // r


class FusionHead:
    """Attention gate plus 1x1 probability head over one or more feature maps."""

    def __init__(self, channels: int, r: int = 4, attention: bool = True):
        self.channels = channels
        self.r = r
        self.attention = attention
        self.hidden = check_reduction(channels, r) if attention else 0
        self._splits: list[int] = []
        self._ops: dict = {}

    def init_params(self, params: ParamStore, rng: np.random.Generator) -> None:
        if self.attention:
            c, hid = self.channels, self.hidden
            params.add(W1_NAME, rng.normal(0.0, math.sqrt(2.0 / c), size=(hid, c)))
            params.add(W2_NAME, rng.normal(0.0, math.sqrt(2.0 / hid), size=(c, hid)))
        add_conv(params, HEAD_NAME, 1, self.channels, 1, rng)

    def _concat(self, features) -> Tensor:
        features = [as_tensor(f, name=f"feature{i}") for i, f in enumerate(features)]
        base = features[0]
        for i, f in enumerate(features[1:], start=1):
            if f.shape[0] != base.shape[0] or f.shape[2:] != base.shape[2:]:
                raise ShapeError(
                    f"fusion: feature{i} has batch/spatial shape "
                    f"{(f.shape[0],) + f.shape[2:]}, expected {(base.shape[0],) + base.shape[2:]}"
                )
        self._splits = [f.shape[1] for f in features]
        z = np.concatenate(features, axis=1) if len(features) > 1 else base
        if z.shape[1] != self.channels:
            raise ShapeError(
                f"fusion: concatenated channel dimension is {z.shape[1]}, "
                f"expected {self.channels}"
            )
        return z

    def attention_map(self, z: Tensor, params: ParamStore) -> np.ndarray:
        ops = {
            "gap": GlobalAvgPool(),
            "fc1": Linear(),
            "relu": ReLU(),
            "fc2": Linear(),
            "gate": Sigmoid(),
        }
        self._ops.update(ops)
        pooled = ops["gap"].forward(z)
        hidden = ops["relu"].forward(ops["fc1"].forward(pooled, params[W1_NAME]))
        return ops["gate"].forward(ops["fc2"].forward(hidden, params[W2_NAME]))

    def forward(self, features, params: ParamStore) -> Tensor:
        z = self._concat(features)
        self._ops = {}
        if self.attention:
            gate = self.attention_map(z, params)
            self._ops["scale"] = ChannelScale()
            z = self._ops["scale"].forward(z, gate)
        self._ops["head"] = ConvStep.create(HEAD_NAME)
        self._ops["prob"] = Sigmoid()
        return self._ops["prob"].forward(self._ops["head"].forward(z, params))

    def backward(self, dprob, params: ParamStore) -> list[Tensor]:
        ops = self._ops
        (dlogits,) = ops["prob"].backward(dprob)
        dz = ops["head"].backward(dlogits, params)
        if self.attention:
            dz, dgate = ops["scale"].backward(dz)
            (dh2,) = ops["gate"].backward(dgate)
            dhidden, dw2 = ops["fc2"].backward(dh2)
            (dh1,) = ops["relu"].backward(dhidden)
            dpooled, dw1 = ops["fc1"].backward(dh1)
            params.accumulate(W1_NAME, dw1)
            params.accumulate(W2_NAME, dw2)
            dz = dz + ops["gap"].backward(dpooled)[0]
        bounds = np.cumsum(self._splits)[:-1]
        return [np.ascontiguousarray(part) for part in np.split(dz, bounds, axis=1)]


def channel_attention(x, p: AttentionParams) -> np.ndarray:
    """Per-(batch, channel) gate in (0, 1)."""
    x = as_tensor(x, name="X")
    if x.shape[1] != p.channels:
        raise ShapeError(
            f"channel_attention: input channel dimension is {x.shape[1]}, expected {p.channels}"
        )
    pooled = GlobalAvgPool().forward(x)
    hidden = ReLU().forward(Linear().forward(pooled, p.w1))
    return Sigmoid().forward(Linear().forward(hidden, p.w2))


def fuse(f_seg, f_dl, params: ParamStore, cfg: FusionConfig | None = None) -> Tensor:
    """Probability map (n, 1, h, w) from the two branch feature maps."""
    cfg = cfg or FusionConfig()
    f_seg = as_tensor(f_seg, name="f_seg")
    f_dl = as_tensor(f_dl, name="f_dl")
    head = FusionHead(f_seg.shape[1] + f_dl.shape[1], cfg.r, cfg.attention)
    return head.forward([f_seg, f_dl], params)


def binarize(prob, threshold: float = 0.5) -> np.ndarray:
    """1 where ``prob >= threshold``, else 0."""
    return (np.asarray(prob) >= threshold).astype(np.uint8)
