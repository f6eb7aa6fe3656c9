"""Dense float64 tensors with an explicit, broadcast-free shape algebra.

This is the shared currency for shape-checked math at the package boundary.
Elementwise operations require identical shapes and matmul checks inner
dimensions, so every alignment in gradient code is written out explicitly.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError


class Tensor:
    """Contiguous row-major float64 array with a fixed positive shape."""

    __slots__ = ("data",)

    def __init__(self, values):
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0:
            raise ShapeError("tensor extents must all be positive")
        if not np.all(np.isfinite(arr)):
            raise DomainError("tensor values must be finite")
        self.data = arr

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, data={self.data.ravel()[:8]}...)"

    def tolist(self):
        return self.data.tolist()

    # -- shape algebra ----------------------------------------------------

    def reshape(self, new_shape) -> "Tensor":
        new_shape = tuple(int(n) for n in new_shape)
        if any(n <= 0 for n in new_shape):
            raise ShapeError("reshape extents must be positive")
        if int(np.prod(new_shape)) != self.size:
            raise ShapeError(
                f"cannot reshape {self.shape} (size {self.size}) to {new_shape}")
        out = Tensor.__new__(Tensor)
        out.data = self.data.reshape(new_shape)
        return out

    def slice_channel(self, axis: int, index: int) -> "Tensor":
        """Drop one axis by fixing it at ``index``; rank reduces by one."""
        if not 0 <= axis < self.data.ndim:
            raise ShapeError(f"axis {axis} out of range for rank {self.data.ndim}")
        if not 0 <= index < self.shape[axis]:
            raise IndexError(
                f"index {index} out of range for axis {axis} of extent {self.shape[axis]}")
        out = Tensor.__new__(Tensor)
        out.data = np.ascontiguousarray(np.take(self.data, index, axis=axis))
        if out.data.ndim == 0:
            out.data = out.data.reshape(1)
        return out

    # -- elementwise ops (no broadcasting) --------------------------------

    def _binop(self, other: "Tensor", op) -> "Tensor":
        if not isinstance(other, Tensor):
            raise TypeError("operand must be a Tensor")
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        out = Tensor.__new__(Tensor)
        out.data = op(self.data, other.data)
        return out

    def __add__(self, other):
        return self._binop(other, np.add)

    def __sub__(self, other):
        return self._binop(other, np.subtract)

    def __mul__(self, other):
        return self._binop(other, np.multiply)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- reductions --------------------------------------------------------

    def reduce_max(self) -> float:
        return float(self.data.max())


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard 2-D matrix product; inner dimensions must agree exactly."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul operands must be rank-2")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} vs {b.shape}")
    out = Tensor.__new__(Tensor)
    out.data = a.data @ b.data
    return out


def reduce_max(t: Tensor) -> float:
    return t.reduce_max()
