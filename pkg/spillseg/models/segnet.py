"""Encoder-decoder branch that reuses max-pooling indices for upsampling."""

from __future__ import annotations

import numpy as np

from spillseg.config.schema.models import SegNetConfig
from spillseg.core.errors import ShapeError
from spillseg.core.ops import MaxPool2x2, MaxUnpool2x2, ReLU
from spillseg.core.tensor import ParamStore, PoolIndexMap, Tensor, as_tensor
from spillseg.models.base import Branch, ConvStep, OpStep, add_conv


class SegNetBranch(Branch):
    """Fine-detail branch.

    Each encoder stage is conv -> relu -> 2x2 max-pool; each decoder stage,
    in reverse, is unpool (with the paired index map) -> conv -> relu. A
    final linear 1x1 convolution emits ``out_channels`` feature maps.
    """

    def __init__(self, cfg: SegNetConfig | None = None):
        super().__init__(cfg or SegNetConfig())
        self._encoder: list = []
        self._decoder: list = []
        self.unpooled: list[Tensor] = []

    @property
    def out_channels(self) -> int:
        return self.cfg.out_channels

    def _decoder_width(self, stage: int) -> int:
        widths = self.cfg.stage_channels
        return widths[stage - 1] if stage > 0 else widths[0]

    def init_params(self, params: ParamStore, rng: np.random.Generator) -> None:
        k = self.cfg.kernel_size
        cin = self.cfg.in_channels
        for i, width in enumerate(self.cfg.stage_channels):
            add_conv(params, f"segnet.enc{i}", width, cin, k, rng)
            cin = width
        for i in reversed(range(self.cfg.depth)):
            add_conv(
                params, f"segnet.dec{i}", self._decoder_width(i), self.cfg.stage_channels[i], k, rng
            )
        add_conv(params, "segnet.head", self.cfg.out_channels, self.cfg.stage_channels[0], 1, rng)

    def validate_input(self, x: Tensor) -> None:
        _, c, h, w = x.shape
        if c != self.cfg.in_channels:
            raise ShapeError(
                f"segnet: input channel dimension is {c}, expected {self.cfg.in_channels}"
            )
        divisor = self.cfg.divisor
        if h % divisor:
            raise ShapeError(f"segnet: input height {h} is not divisible by {divisor}")
        if w % divisor:
            raise ShapeError(f"segnet: input width {w} is not divisible by {divisor}")

    def encode(self, x, params: ParamStore) -> tuple[Tensor, list[PoolIndexMap]]:
        x = as_tensor(x)
        self.validate_input(x)
        pad = (self.cfg.kernel_size - 1) // 2
        self._encoder = []
        indices: list[PoolIndexMap] = []
        for i in range(self.cfg.depth):
            conv = ConvStep.create(f"segnet.enc{i}", padding=pad)
            act = OpStep(ReLU())
            pool = MaxPool2x2()
            x = pool.forward(act.forward(conv.forward(x, params)))
            indices.append(pool.indices)
            self._encoder.extend([conv, act, OpStep(pool)])
        return x, indices

    def decode(self, bottleneck, indices: list[PoolIndexMap], params: ParamStore) -> Tensor:
        if len(indices) != self.cfg.depth:
            raise ShapeError(
                f"segnet: index stack depth {len(indices)} does not match "
                f"stage count {self.cfg.depth}"
            )
        x = as_tensor(bottleneck, name="bottleneck")
        expected = self.cfg.stage_channels[-1]
        if x.shape[1] != expected:
            raise ShapeError(
                f"segnet: bottleneck channel dimension is {x.shape[1]}, expected {expected}"
            )
        pad = (self.cfg.kernel_size - 1) // 2
        self._decoder = []
        self.unpooled = []
        for i in reversed(range(self.cfg.depth)):
            unpool = OpStep(MaxUnpool2x2())
            conv = ConvStep.create(f"segnet.dec{i}", padding=pad)
            act = OpStep(ReLU())
            up = unpool.forward(x, indices[i])
            self.unpooled.append(up)
            x = act.forward(conv.forward(up, params))
            self._decoder.extend([unpool, conv, act])
        head = ConvStep.create("segnet.head")
        self._decoder.append(head)
        return head.forward(x, params)

    def forward(self, x, params: ParamStore) -> Tensor:
        bottleneck, indices = self.encode(x, params)
        return self.decode(bottleneck, indices, params)

    def backward(self, dout, params: ParamStore) -> Tensor:
        grad = np.asarray(dout, dtype=np.float64)
        for step in reversed(self._encoder + self._decoder):
            grad = step.backward(grad, params)
        return grad


def segnet_encode(x, params: ParamStore, cfg: SegNetConfig) -> tuple[Tensor, list[PoolIndexMap]]:
    return SegNetBranch(cfg).encode(x, params)


def segnet_decode(
    bottleneck, indices: list[PoolIndexMap], params: ParamStore, cfg: SegNetConfig
) -> Tensor:
    return SegNetBranch(cfg).decode(bottleneck, indices, params)
