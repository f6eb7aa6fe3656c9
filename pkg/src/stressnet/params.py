"""Named parameter arrays with paired gradient buffers."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class Param:
    """One trainable array plus its gradient buffer of identical shape."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


class ParamStore:
    """Ordered mapping of dotted names to Param objects.

    Registration order is fixed and drives both the optimizer update order
    and the checkpoint record order, so two runs with equal seeds write
    byte-identical checkpoints.
    """

    def __init__(self):
        self._params: dict[str, Param] = {}

    def register(self, name: str, param: Param) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        self._params[name] = param
        return param

    def adopt(self, prefix: str, layer) -> None:
        """Register every named param of a layer under ``prefix.suffix``."""
        for suffix, p in layer.named_params():
            self.register(f"{prefix}.{suffix}", p)

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def scale_grads(self, factor: float) -> None:
        for p in self._params.values():
            p.grad *= factor

    def n_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        if set(snap) != set(self._params):
            raise ShapeError("snapshot names do not match the store")
        for name, arr in snap.items():
            p = self._params[name]
            if arr.shape != p.value.shape:
                raise ShapeError(f"snapshot shape mismatch for {name}")
            p.value[...] = arr
