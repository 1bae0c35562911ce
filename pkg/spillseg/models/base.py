"""Base class and shared building blocks for network branches."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from spillseg.core.ops import Conv2d, Operator
from spillseg.core.tensor import ParamStore, Tensor


def he_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Zero-mean normal weights with variance 2 / fan_in."""
    fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)


def add_conv(
    params: ParamStore,
    name: str,
    cout: int,
    cin: int,
    kernel: int,
    rng: np.random.Generator,
) -> None:
    params.add(f"{name}.weight", he_normal(rng, (cout, cin, kernel, kernel)))
    params.add(f"{name}.bias", np.zeros(cout))


@dataclass
class ConvStep:
    """A convolution bound to the ``<name>.weight`` / ``<name>.bias`` parameters."""

    name: str
    op: Conv2d

    @classmethod
    def create(cls, name: str, *, stride: int = 1, dilation: int = 1, padding: int = 0):
        return cls(name, Conv2d(stride=stride, dilation=dilation, padding=padding))

    def forward(self, x, params: ParamStore) -> Tensor:
        return self.op.forward(x, params[f"{self.name}.weight"], params[f"{self.name}.bias"])

    def backward(self, dout, params: ParamStore) -> Tensor:
        dx, dw, db = self.op.backward(dout)
        params.accumulate(f"{self.name}.weight", dw)
        params.accumulate(f"{self.name}.bias", db)
        return dx


@dataclass
class OpStep:
    """A parameter-free operator whose first input carries the activation."""

    op: Operator

    def forward(self, *inputs):
        return self.op.forward(*inputs)

    def backward(self, dout, params: ParamStore | None = None) -> Tensor:
        return self.op.backward(dout)[0]


class Branch(ABC):
    """Base class for feature branches.

    Subclasses MUST implement init_params(), forward() and backward().

    ``forward`` records the operator instances it used; ``backward`` must be
    called with the gradient of the most recent forward output, accumulates
    parameter gradients into the store and returns the input gradient.
    """

    def __init__(self, cfg):
        self.cfg = cfg

    @property
    @abstractmethod
    def out_channels(self) -> int:
        """Channel count of the emitted feature map."""

    @abstractmethod
    def init_params(self, params: ParamStore, rng: np.random.Generator) -> None:
        """Register this branch's parameters in *params*."""

    @abstractmethod
    def forward(self, x, params: ParamStore) -> Tensor:
        """Feature map at full input resolution."""

    @abstractmethod
    def backward(self, dout, params: ParamStore) -> Tensor:
        """Accumulate parameter gradients and return d(input)."""
