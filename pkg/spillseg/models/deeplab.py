"""Context branch: strided entry convolutions, ASPP and bilinear upsampling."""

from __future__ import annotations

import numpy as np

from spillseg.config.schema.models import ASPPConfig
from spillseg.core.errors import ShapeError
from spillseg.core.ops import BilinearUpsample, BroadcastSpatial, GlobalAvgPool, ReLU
from spillseg.core.tensor import ParamStore, Tensor, as_tensor
from spillseg.models.base import Branch, ConvStep, OpStep, add_conv


class DeepLabBranch(Branch):
    def __init__(self, cfg: ASPPConfig | None = None):
        super().__init__(cfg or ASPPConfig())
        self._entry: list = []
        self._paths: list[list] = []
        self._image_path: list = []
        self._image_gap: GlobalAvgPool | None = None
        self._project: ConvStep | None = None
        self._upsample: OpStep | None = None
        self._aspp_in_shape: tuple[int, ...] = ()

    @property
    def out_channels(self) -> int:
        return self.cfg.out_channels

    @property
    def aspp_in_channels(self) -> int:
        return self.cfg.entry_channels if self.cfg.entry_layers else self.cfg.in_channels

    def init_params(self, params: ParamStore, rng: np.random.Generator) -> None:
        cfg = self.cfg
        cin = cfg.in_channels
        for j in range(cfg.entry_layers):
            add_conv(params, f"deeplab.entry{j}", cfg.entry_channels, cin, 3, rng)
            cin = cfg.entry_channels
        for rate in cfg.dilation_rates:
            add_conv(params, f"deeplab.aspp.rate{rate}", cfg.branch_channels, cin, 3, rng)
        add_conv(params, "deeplab.aspp.image", cfg.branch_channels, cin, 1, rng)
        concat = (len(cfg.dilation_rates) + 1) * cfg.branch_channels
        add_conv(params, "deeplab.aspp.project", cfg.out_channels, concat, 1, rng)

    def validate_input(self, x: Tensor) -> None:
        _, c, h, w = x.shape
        if c != self.cfg.in_channels:
            raise ShapeError(
                f"deeplab: input channel dimension is {c}, expected {self.cfg.in_channels}"
            )
        stride = self.cfg.output_stride
        if h % stride:
            raise ShapeError(f"deeplab: input height {h} is not divisible by output stride {stride}")
        if w % stride:
            raise ShapeError(f"deeplab: input width {w} is not divisible by output stride {stride}")

    def encode(self, x, params: ParamStore) -> Tensor:
        x = as_tensor(x)
        self.validate_input(x)
        self._entry = []
        for j in range(self.cfg.entry_layers):
            conv = ConvStep.create(f"deeplab.entry{j}", stride=2, padding=1)
            act = OpStep(ReLU())
            x = act.forward(conv.forward(x, params))
            self._entry.extend([conv, act])
        return x

    def aspp(self, x, params: ParamStore) -> Tensor:
        x = as_tensor(x)
        if x.shape[1] != self.aspp_in_channels:
            raise ShapeError(
                f"aspp: input channel dimension is {x.shape[1]}, "
                f"expected {self.aspp_in_channels}"
            )
        n, _, h, w = x.shape
        self._aspp_in_shape = x.shape
        outputs = []
        self._paths = []
        for rate in self.cfg.dilation_rates:
            conv = ConvStep.create(f"deeplab.aspp.rate{rate}", dilation=rate, padding=rate)
            act = OpStep(ReLU())
            outputs.append(act.forward(conv.forward(x, params)))
            self._paths.append([conv, act])

        # image-level path: pooled vector -> 1x1 conv -> relu -> constant planes
        self._image_gap = GlobalAvgPool()
        pooled = self._image_gap.forward(x).reshape(n, -1, 1, 1)
        conv = ConvStep.create("deeplab.aspp.image")
        act = OpStep(ReLU())
        spread = OpStep(BroadcastSpatial(h, w))
        outputs.append(spread.forward(act.forward(conv.forward(pooled, params))))
        self._image_path = [conv, act, spread]

        self._project = ConvStep.create("deeplab.aspp.project")
        return self._project.forward(np.concatenate(outputs, axis=1), params)

    def forward(self, x, params: ParamStore) -> Tensor:
        y = self.aspp(self.encode(x, params), params)
        self._upsample = None
        if self.cfg.output_stride > 1:
            self._upsample = OpStep(BilinearUpsample(self.cfg.output_stride))
            y = self._upsample.forward(y)
        return y

    def _aspp_backward(self, dout, params: ParamStore) -> Tensor:
        dcat = self._project.backward(dout, params)
        width = self.cfg.branch_channels
        dx = np.zeros(self._aspp_in_shape)
        for k, path in enumerate(self._paths):
            grad = dcat[:, k * width : (k + 1) * width]
            for step in reversed(path):
                grad = step.backward(grad, params)
            dx += grad

        grad = dcat[:, len(self._paths) * width :]
        for step in reversed(self._image_path):
            grad = step.backward(grad, params)
        dx += self._image_gap.backward(grad.reshape(grad.shape[:2]))[0]
        return dx

    def backward(self, dout, params: ParamStore) -> Tensor:
        grad = np.asarray(dout, dtype=np.float64)
        if self._upsample is not None:
            grad = self._upsample.backward(grad)
        grad = self._aspp_backward(grad, params)
        for step in reversed(self._entry):
            grad = step.backward(grad, params)
        return grad


def deeplab_encode(x, params: ParamStore, cfg: ASPPConfig) -> Tensor:
    return DeepLabBranch(cfg).encode(x, params)


def aspp(x, params: ParamStore, cfg: ASPPConfig) -> Tensor:
    return DeepLabBranch(cfg).aspp(x, params)


def deeplab_forward(x, params: ParamStore, cfg: ASPPConfig) -> Tensor:
    return DeepLabBranch(cfg).forward(x, params)
