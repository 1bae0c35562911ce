"""Dense rank-4 tensors, parameter storage and pooling index maps.

A tensor is a plain ``numpy.ndarray`` of 64-bit floats laid out as
(batch, channels, rows, cols). Operators never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from spillseg.core.errors import ShapeError

Tensor = NDArray[np.float64]

DTYPE = np.float64


def as_tensor(x, *, name: str = "x") -> Tensor:
    """Return *x* as a contiguous float64 rank-4 array."""
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if arr.ndim != 4:
        raise ShapeError(
            f"{name}: expected rank-4 (n, c, h, w) tensor, got rank {arr.ndim} "
            f"with shape {arr.shape}"
        )
    return arr


@dataclass(frozen=True)
class PoolIndexMap:
    """Argmax positions recorded by 2x2 max pooling.

    ``indices`` mirrors the pooled output shape (n, c, h/2, w/2); each value
    is a flat row-major index into the (h, w) plane of the pooling input.
    """

    indices: NDArray[np.int64]
    input_hw: tuple[int, int]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.indices.shape)

    def validate(self) -> None:
        """Reject maps whose indices fall outside their own 2x2 window."""
        h, w = self.input_hw
        if self.indices.ndim != 4:
            raise ShapeError(f"pool index map must be rank-4, got {self.indices.ndim}")
        ph, pw = self.indices.shape[2:]
        if (2 * ph, 2 * pw) != (h, w):
            raise ShapeError(
                f"pool index map of spatial size {ph}x{pw} does not match "
                f"input plane {h}x{w}"
            )
        rows, cols = np.divmod(self.indices, w)
        cell_r = np.arange(ph).reshape(1, 1, ph, 1)
        cell_c = np.arange(pw).reshape(1, 1, 1, pw)
        inside = (
            (self.indices >= 0)
            & (self.indices < h * w)
            & (rows // 2 == cell_r)
            & (cols // 2 == cell_c)
        )
        if not np.all(inside):
            bad = np.argwhere(~inside)[0]
            raise ShapeError(
                f"corrupt pool index map: index {int(self.indices[tuple(bad)])} at "
                f"cell {tuple(int(v) for v in bad)} lies outside its 2x2 window"
            )


class ParamStore:
    """Named parameter tensors with same-shaped gradient buffers.

    Iteration is lexicographic by name so serialisation and optimiser
    updates visit parameters in a fixed order.
    """

    def __init__(self) -> None:
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values:
            raise KeyError(f"parameter already registered: {name}")
        arr = np.array(value, dtype=DTYPE, copy=True)
        self._values[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._values[name]
        except KeyError:
            raise KeyError(f"unknown parameter: {name}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names())

    def names(self) -> list[str]:
        return sorted(self._values)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def set(self, name: str, value) -> None:
        """Overwrite a parameter in place; shapes must agree."""
        current = self[name]
        arr = np.asarray(value, dtype=DTYPE)
        if arr.shape != current.shape:
            raise ShapeError(
                f"parameter {name}: shape {arr.shape} does not match {current.shape}"
            )
        current[...] = arr

    def accumulate(self, name: str, grad) -> None:
        buf = self._grads[name]
        g = np.asarray(grad, dtype=DTYPE)
        if g.shape != buf.shape:
            raise ShapeError(
                f"gradient for {name}: shape {g.shape} does not match {buf.shape}"
            )
        buf += g

    def zero_grad(self) -> None:
        for buf in self._grads.values():
            buf.fill(0.0)

    def grad_norm(self, name: str) -> float:
        return float(np.linalg.norm(self._grads[name]))

    def num_elements(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, value in self.items():
            out.add(name, value)
        return out

    def quantized(self) -> "ParamStore":
        """Copy with every value rounded through 32-bit floats (checkpoint precision)."""
        out = ParamStore()
        for name, value in self.items():
            out.add(name, value.astype(np.float32).astype(DTYPE))
        return out
