"""Differentiable operators with explicit forward and backward passes.

Each operator instance records the context of its most recent ``forward``
call; ``backward`` takes the upstream gradient and returns one gradient per
forward input (``None`` for non-differentiable inputs such as index maps).
Branches build fresh operator instances per forward pass and replay them in
reverse, so there is no general graph machinery here.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import expit

from spillseg.core.errors import ShapeError
from spillseg.core.tensor import DTYPE, PoolIndexMap, Tensor, as_tensor

_SIGMOID_LO = np.finfo(DTYPE).tiny
_SIGMOID_HI = np.nextafter(1.0, 0.0)


class Operator(ABC):
    """Base class for all differentiable operators."""

    name: str = ""

    @abstractmethod
    def forward(self, *inputs):
        """Compute the output and remember what backward needs."""

    @abstractmethod
    def backward(self, dout) -> tuple:
        """Return gradients w.r.t. each forward input."""


def _check_positive_int(value: int, label: str, minimum: int) -> int:
    if int(value) != value or value < minimum:
        raise ShapeError(f"{label} must be an integer >= {minimum}, got {value}")
    return int(value)


class Conv2d(Operator):
    """Cross-correlation with zero padding, stride and dilation."""

    name = "conv2d"

    def __init__(self, stride: int = 1, dilation: int = 1, padding: int = 0):
        self.stride = _check_positive_int(stride, "conv2d stride", 1)
        self.dilation = _check_positive_int(dilation, "conv2d dilation", 1)
        self.padding = _check_positive_int(padding, "conv2d padding", 0)
        self._ctx = None

    def output_size(self, h: int, w: int, kh: int, kw: int) -> tuple[int, int]:
        s, d, p = self.stride, self.dilation, self.padding
        ho = (h + 2 * p - d * (kh - 1) - 1) // s + 1
        wo = (w + 2 * p - d * (kw - 1) - 1) // s + 1
        return ho, wo

    def _validate(self, x: Tensor, w: Tensor, b: np.ndarray) -> None:
        n, cin, h, wd = x.shape
        cout, wcin, kh, kw = w.shape
        if wcin != cin:
            raise ShapeError(
                f"conv2d: input channel dimension is {cin} but weight expects {wcin}"
            )
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"conv2d: kernel dimensions must be odd, got {kh}x{kw}")
        if b.shape != (cout,):
            raise ShapeError(
                f"conv2d: bias length {b.shape[0] if b.ndim else 0} does not match "
                f"output channel dimension {cout}"
            )
        eff_h = self.dilation * (kh - 1) + 1
        eff_w = self.dilation * (kw - 1) + 1
        if eff_h > h + 2 * self.padding:
            raise ShapeError(
                f"conv2d: effective kernel height {eff_h} exceeds padded input height "
                f"{h + 2 * self.padding}"
            )
        if eff_w > wd + 2 * self.padding:
            raise ShapeError(
                f"conv2d: effective kernel width {eff_w} exceeds padded input width "
                f"{wd + 2 * self.padding}"
            )

    def forward(self, x, w, b) -> Tensor:
        x = as_tensor(x)
        w = as_tensor(w, name="weight")
        b = np.asarray(b, dtype=DTYPE).reshape(-1)
        self._validate(x, w, b)

        n, cin, h, wd = x.shape
        _, _, kh, kw = w.shape
        s, d, p = self.stride, self.dilation, self.padding
        ho, wo = self.output_size(h, wd, kh, kw)

        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = np.empty((n, cin, kh, kw, ho, wo), dtype=DTYPE)
        for i in range(kh):
            r0 = i * d
            for j in range(kw):
                c0 = j * d
                cols[:, :, i, j] = xp[
                    :, :, r0 : r0 + s * (ho - 1) + 1 : s, c0 : c0 + s * (wo - 1) + 1 : s
                ]

        # (cout, n, ho, wo)
        y = np.tensordot(w, cols, axes=([1, 2, 3], [1, 2, 3]))
        y = y.transpose(1, 0, 2, 3) + b[None, :, None, None]
        self._ctx = (x.shape, xp.shape, cols, w)
        return np.ascontiguousarray(y)

    def backward(self, dout) -> tuple:
        x_shape, xp_shape, cols, w = self._ctx
        dy = np.asarray(dout, dtype=DTYPE)
        _, _, kh, kw = w.shape
        _, _, ho, wo = dy.shape
        s, d, p = self.stride, self.dilation, self.padding

        db = dy.sum(axis=(0, 2, 3))
        dw = np.tensordot(dy, cols, axes=([0, 2, 3], [0, 4, 5]))
        dcols = np.tensordot(w, dy, axes=([0], [1])).transpose(3, 0, 1, 2, 4, 5)

        dxp = np.zeros(xp_shape, dtype=DTYPE)
        for i in range(kh):
            r0 = i * d
            for j in range(kw):
                c0 = j * d
                dxp[
                    :, :, r0 : r0 + s * (ho - 1) + 1 : s, c0 : c0 + s * (wo - 1) + 1 : s
                ] += dcols[:, :, i, j]
        h, wd = x_shape[2:]
        dx = dxp[:, :, p : p + h, p : p + wd] if p else dxp
        return np.ascontiguousarray(dx), dw, db


class MaxPool2x2(Operator):
    """2x2 / stride-2 max pooling that records argmax indices.

    Ties resolve to the first maximal element in row-major window order.
    """

    name = "maxpool2x2"

    def __init__(self):
        self.indices: PoolIndexMap | None = None
        self._shape = None

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool2x2: spatial dims must be even, got {h}x{w}")
        ph, pw = h // 2, w // 2
        windows = (
            x.reshape(n, c, ph, 2, pw, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ph, pw, 4)
        )
        k = np.argmax(windows, axis=-1)
        y = np.take_along_axis(windows, k[..., None], axis=-1)[..., 0]
        rows = 2 * np.arange(ph).reshape(1, 1, ph, 1) + k // 2
        cols = 2 * np.arange(pw).reshape(1, 1, 1, pw) + k % 2
        self.indices = PoolIndexMap((rows * w + cols).astype(np.int64), (h, w))
        self._shape = x.shape
        return np.ascontiguousarray(y)

    def backward(self, dout) -> tuple:
        n, c, h, w = self._shape
        dx = np.zeros((n, c, h * w), dtype=DTYPE)
        np.put_along_axis(
            dx,
            self.indices.indices.reshape(n, c, -1),
            np.asarray(dout, dtype=DTYPE).reshape(n, c, -1),
            axis=2,
        )
        return (dx.reshape(n, c, h, w),)


class MaxUnpool2x2(Operator):
    """Place pooled values back at their recorded argmax positions."""

    name = "maxunpool2x2"

    def __init__(self):
        self._indices: PoolIndexMap | None = None

    def forward(self, y, indices: PoolIndexMap) -> Tensor:
        y = as_tensor(y, name="y")
        if y.shape != indices.shape:
            raise ShapeError(
                f"maxunpool2x2: values of shape {y.shape} do not match index map "
                f"of shape {indices.shape}"
            )
        indices.validate()
        n, c = y.shape[:2]
        h, w = indices.input_hw
        out = np.zeros((n, c, h * w), dtype=DTYPE)
        np.put_along_axis(out, indices.indices.reshape(n, c, -1), y.reshape(n, c, -1), axis=2)
        self._indices = indices
        return out.reshape(n, c, h, w)

    def backward(self, dout) -> tuple:
        idx = self._indices
        dout = np.asarray(dout, dtype=DTYPE)
        n, c = dout.shape[:2]
        dy = np.take_along_axis(
            dout.reshape(n, c, -1), idx.indices.reshape(n, c, -1), axis=2
        ).reshape(idx.shape)
        return dy, None


class GlobalAvgPool(Operator):
    """Spatial mean per (batch, channel); output shape (n, c)."""

    name = "global_avg_pool"

    def __init__(self):
        self._shape = None

    def forward(self, x) -> np.ndarray:
        x = as_tensor(x)
        if x.shape[2] * x.shape[3] < 1:
            raise ShapeError("global_avg_pool: empty spatial plane")
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout) -> tuple:
        n, c, h, w = self._shape
        g = np.asarray(dout, dtype=DTYPE).reshape(n, c, 1, 1) / (h * w)
        return (np.broadcast_to(g, self._shape).copy(),)


def interpolation_matrix(in_len: int, out_len: int) -> np.ndarray:
    """Linear interpolation weights (out_len x in_len), align-corners-false.

    Source coordinate is ``(dst + 0.5) * in_len / out_len - 0.5`` clamped to
    ``[0, in_len - 1]``.
    """
    dst = np.arange(out_len, dtype=DTYPE)
    src = (dst + 0.5) * (in_len / out_len) - 0.5
    src = np.clip(src, 0.0, in_len - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_len - 1)
    frac = src - i0
    m = np.zeros((out_len, in_len), dtype=DTYPE)
    rows = np.arange(out_len)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, i1), frac)
    return m


class BilinearResize(Operator):
    """Separable bilinear resampling to a fixed output size."""

    name = "bilinear_resize"

    def __init__(self, out_h: int, out_w: int):
        self.out_h = _check_positive_int(out_h, "output height", 1)
        self.out_w = _check_positive_int(out_w, "output width", 1)
        self._mats = None

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        mh = interpolation_matrix(x.shape[2], self.out_h)
        mw = interpolation_matrix(x.shape[3], self.out_w)
        self._mats = (mh, mw)
        return np.ascontiguousarray(np.matmul(np.matmul(mh, x), mw.T))

    def backward(self, dout) -> tuple:
        mh, mw = self._mats
        dy = np.asarray(dout, dtype=DTYPE)
        return (np.ascontiguousarray(np.matmul(np.matmul(mh.T, dy), mw)),)


class BilinearUpsample(BilinearResize):
    """Bilinear upsampling by an integer factor >= 2."""

    name = "bilinear_upsample"

    def __init__(self, factor: int):
        self.factor = _check_positive_int(factor, "upsample factor", 2)
        super().__init__(1, 1)

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        self.out_h = x.shape[2] * self.factor
        self.out_w = x.shape[3] * self.factor
        return super().forward(x)


class ReLU(Operator):
    name = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout) -> tuple:
        return (np.where(self._mask, dout, 0.0),)


class Sigmoid(Operator):
    """Logistic function, kept strictly inside (0, 1)."""

    name = "sigmoid"

    def __init__(self):
        self._y = None

    def forward(self, x) -> np.ndarray:
        y = np.clip(expit(np.asarray(x, dtype=DTYPE)), _SIGMOID_LO, _SIGMOID_HI)
        self._y = y
        return y

    def backward(self, dout) -> tuple:
        y = self._y
        return (np.asarray(dout, dtype=DTYPE) * y * (1.0 - y),)


class ConcatChannels(Operator):
    name = "concat_channels"

    def __init__(self):
        self._split = None

    def forward(self, a, b) -> Tensor:
        a = as_tensor(a, name="a")
        b = as_tensor(b, name="b")
        if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
            raise ShapeError(
                f"concat_channels: batch/spatial dims differ, {a.shape} vs {b.shape}"
            )
        self._split = a.shape[1]
        return np.concatenate([a, b], axis=1)

    def backward(self, dout) -> tuple:
        dout = np.asarray(dout, dtype=DTYPE)
        return dout[:, : self._split].copy(), dout[:, self._split :].copy()


class Linear(Operator):
    """Bias-free dense product ``x @ W.T`` on (n, k) inputs."""

    name = "linear"

    def __init__(self):
        self._ctx = None

    def forward(self, x, weight) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        weight = np.asarray(weight, dtype=DTYPE)
        if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
            raise ShapeError(
                f"linear: cannot multiply input {x.shape} by weight {weight.shape}"
            )
        self._ctx = (x, weight)
        return x @ weight.T

    def backward(self, dout) -> tuple:
        x, weight = self._ctx
        dout = np.asarray(dout, dtype=DTYPE)
        return dout @ weight, dout.T @ x


class ChannelScale(Operator):
    """Multiply each (batch, channel) plane by a scalar gate."""

    name = "channel_scale"

    def __init__(self):
        self._ctx = None

    def forward(self, z, gate) -> Tensor:
        z = as_tensor(z, name="z")
        gate = np.asarray(gate, dtype=DTYPE)
        if gate.shape != z.shape[:2]:
            raise ShapeError(
                f"channel_scale: gate shape {gate.shape} does not match {z.shape[:2]}"
            )
        self._ctx = (z, gate)
        return z * gate[:, :, None, None]

    def backward(self, dout) -> tuple:
        z, gate = self._ctx
        dout = np.asarray(dout, dtype=DTYPE)
        return dout * gate[:, :, None, None], (dout * z).sum(axis=(2, 3))


class BroadcastSpatial(Operator):
    """Expand a (n, c, 1, 1) tensor to (n, c, h, w) by constant replication."""

    name = "broadcast_spatial"

    def __init__(self, h: int, w: int):
        self.h = h
        self.w = w

    def forward(self, v) -> Tensor:
        v = as_tensor(v, name="v")
        if v.shape[2:] != (1, 1):
            raise ShapeError(f"broadcast_spatial: expected 1x1 planes, got {v.shape}")
        return np.broadcast_to(v, v.shape[:2] + (self.h, self.w)).copy()

    def backward(self, dout) -> tuple:
        return (np.asarray(dout, dtype=DTYPE).sum(axis=(2, 3), keepdims=True),)


def conv2d(x, w, b, stride: int = 1, dilation: int = 1, padding: int = 0) -> Tensor:
    return Conv2d(stride=stride, dilation=dilation, padding=padding).forward(x, w, b)


def maxpool2x2(x) -> tuple[Tensor, PoolIndexMap]:
    op = MaxPool2x2()
    y = op.forward(x)
    return y, op.indices


def maxunpool2x2(y, indices: PoolIndexMap) -> Tensor:
    return MaxUnpool2x2().forward(y, indices)


def global_avg_pool(x) -> np.ndarray:
    return GlobalAvgPool().forward(x)


def bilinear_upsample(x, factor: int) -> Tensor:
    return BilinearUpsample(factor).forward(x)


def bilinear_resize(x, out_h: int, out_w: int) -> Tensor:
    return BilinearResize(out_h, out_w).forward(x)


def relu(x) -> np.ndarray:
    return ReLU().forward(x)


def sigmoid(x) -> np.ndarray:
    return Sigmoid().forward(x)


def concat_channels(a, b) -> Tensor:
    return ConcatChannels().forward(a, b)


def split_channels(z, split: int) -> tuple[Tensor, Tensor]:
    """Inverse of concat_channels at channel position *split*."""
    z = as_tensor(z, name="z")
    if not 0 <= split <= z.shape[1]:
        raise ShapeError(f"split_channels: split {split} outside 0..{z.shape[1]}")
    return z[:, :split].copy(), z[:, split:].copy()
