"""Differentiable building blocks with hand-derived backward passes.

Shape conventions, used everywhere without exception:

* spatial feature stacks are ``(batch, height, width, time)``
* sequence features are ``(batch, features, time)``

The temporal axis is never mixed by the convolution or pooling layers: time
channel ``t`` of an output depends only on time channel ``t`` of the input
and on kernel slice ``t``. Recurrent layers are the only place information
crosses time steps.

Every layer keeps exactly one forward cache and invalidates it after the
matching backward call, so a stale or double backward raises instead of
silently reusing old activations. Module-level functions mirror the layer
classes for single (unbatched) inputs.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .errors import ShapeError, StaleCacheError
from .params import Param
from .rng import SplitMix64


def sigmoid(x):
    # tanh formulation is overflow-safe for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def glorot_uniform(rng: SplitMix64, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_array(shape, -limit, limit)


def _as_f64(x, rank: int, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != rank:
        raise ShapeError(f"{what} must have rank {rank}, got {arr.ndim}")
    return arr


# ---------------------------------------------------------------------------
# temporal-independent convolution
# ---------------------------------------------------------------------------

class TIConv:
    """Valid (no padding) per-time-channel 2-D correlation.

    Kernel shape is (d, d, T); slice t convolves only input channel t, so the
    output keeps the temporal alignment of the input.
    """

    def __init__(self, d: int, delta_t: int, rng: SplitMix64 | None = None):
        if d < 1 or delta_t < 1:
            raise ShapeError("kernel size and depth must be positive")
        if rng is None:
            kernel = np.zeros((d, d, delta_t))
        else:
            kernel = glorot_uniform(rng, (d, d, delta_t), d * d, d * d)
        self.kernel = Param(kernel)
        self._cache = None

    def named_params(self):
        return [("kernel", self.kernel)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        d = self.kernel.shape[0]
        b, h, w, t = x.shape
        if t != self.kernel.shape[2]:
            raise ShapeError(
                f"kernel depth {self.kernel.shape[2]} != input time extent {t}")
        if d > h or d > w:
            raise ShapeError(f"kernel {d}x{d} larger than input {h}x{w}")
        y = K.ti_conv_forward(x, self.kernel.value)
        self._cache = (x, h, w)
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("TIConv.backward without live forward cache")
        x, h, w = self._cache
        self._cache = None
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        self.kernel.grad += K.ti_conv_backward_kernel(x, gy, self.kernel.shape[0])
        return K.ti_conv_backward_input(self.kernel.value, gy, h, w)


def ti_conv_forward(x, kernel):
    """Single-sample convolution; returns (output, cache) for the backward."""
    x = _as_f64(x, 3, "input")
    kernel = _as_f64(kernel, 3, "kernel")
    d = kernel.shape[0]
    if kernel.shape[1] != d:
        raise ShapeError("kernel must be square in its spatial dims")
    if kernel.shape[2] != x.shape[2]:
        raise ShapeError(
            f"kernel depth {kernel.shape[2]} != input time extent {x.shape[2]}")
    if d > x.shape[0] or d > x.shape[1]:
        raise ShapeError("kernel larger than input spatial extent")
    y = K.ti_conv_forward(x[None], kernel)[0]
    cache = {"x": x, "kernel": kernel, "live": True}
    return y, cache


def ti_conv_backward(cache, gy):
    if not cache.get("live"):
        raise StaleCacheError("conv cache already consumed")
    cache["live"] = False
    x, kernel = cache["x"], cache["kernel"]
    gy = np.ascontiguousarray(gy, dtype=np.float64)[None]
    gk = K.ti_conv_backward_kernel(x[None], gy, kernel.shape[0])
    gx = K.ti_conv_backward_input(kernel, gy, x.shape[0], x.shape[1])[0]
    return gx, gk


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

class MaxPool:
    """Non-overlapping d x d blockwise max per time channel.

    Gradient routes to the first maximal element of each block in row-major
    order, which makes the backward pass deterministic under ties.
    """

    def __init__(self, d: int):
        if d < 1:
            raise ShapeError("pool size must be positive")
        self.d = d
        self._cache = None

    def named_params(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, t = x.shape
        if h % self.d or w % self.d:
            raise ShapeError(f"pool size {self.d} does not divide {h}x{w}")
        y, idx = K.max_pool_forward(x, self.d)
        self._cache = (idx, h, w)
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("MaxPool.backward without live forward cache")
        idx, h, w = self._cache
        self._cache = None
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        return K.max_pool_backward(gy, idx, self.d, h, w)


class AvgPool:
    """Non-overlapping d x d blockwise mean, for comparison with MaxPool."""

    def __init__(self, d: int):
        if d < 1:
            raise ShapeError("pool size must be positive")
        self.d = d
        self._cache = None

    def named_params(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, t = x.shape
        if h % self.d or w % self.d:
            raise ShapeError(f"pool size {self.d} does not divide {h}x{w}")
        self._cache = (h, w)
        return K.avg_pool_forward(x, self.d)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("AvgPool.backward without live forward cache")
        h, w = self._cache
        self._cache = None
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        return K.avg_pool_backward(gy, self.d, h, w)


def max_pool_forward(x, d):
    x = _as_f64(x, 3, "input")
    if x.shape[0] % d or x.shape[1] % d:
        raise ShapeError(f"pool size {d} does not divide {x.shape[:2]}")
    y, idx = K.max_pool_forward(x[None], d)
    return y[0], {"idx": idx, "d": d, "h": x.shape[0], "w": x.shape[1], "live": True}


def max_pool_backward(cache, gy):
    if not cache.get("live"):
        raise StaleCacheError("pool cache already consumed")
    cache["live"] = False
    gy = np.ascontiguousarray(gy, dtype=np.float64)[None]
    return K.max_pool_backward(gy, cache["idx"], cache["d"], cache["h"], cache["w"])[0]


def avg_pool_forward(x, d):
    x = _as_f64(x, 3, "input")
    if x.shape[0] % d or x.shape[1] % d:
        raise ShapeError(f"pool size {d} does not divide {x.shape[:2]}")
    return K.avg_pool_forward(x[None], d)[0], {"d": d, "h": x.shape[0],
                                               "w": x.shape[1], "live": True}


def avg_pool_backward(cache, gy):
    if not cache.get("live"):
        raise StaleCacheError("pool cache already consumed")
    cache["live"] = False
    gy = np.ascontiguousarray(gy, dtype=np.float64)[None]
    return K.avg_pool_backward(gy, cache["d"], cache["h"], cache["w"])[0]


# ---------------------------------------------------------------------------
# fully connected (per time step, bias-free)
# ---------------------------------------------------------------------------

class FullyConnected:
    """Per-step linear map: flatten each h x w channel and left-multiply by W."""

    def __init__(self, out_dim: int, in_hw: int, rng: SplitMix64 | None = None):
        if rng is None:
            w = np.zeros((out_dim, in_hw))
        else:
            w = glorot_uniform(rng, (out_dim, in_hw), in_hw, out_dim)
        self.w = Param(w)
        self._cache = None

    def named_params(self):
        return [("w", self.w)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, t = x.shape
        if h * w != self.w.shape[1]:
            raise ShapeError(
                f"weight expects {self.w.shape[1]} inputs, got {h}x{w}")
        flat = x.reshape(b, h * w, t)
        y = self.w.value @ flat
        self._cache = (flat, (b, h, w, t))
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("FullyConnected.backward without live cache")
        flat, (b, h, w, t) = self._cache
        self._cache = None
        self.w.grad += np.tensordot(gy, flat, axes=([0, 2], [0, 2]))
        gx = np.ascontiguousarray(self.w.value.T) @ gy
        return np.ascontiguousarray(gx.reshape(b, h, w, t))


def fc_forward(x, w):
    x = _as_f64(x, 3, "input")
    w = _as_f64(w, 2, "weight")
    h, ww, t = x.shape
    if h * ww != w.shape[1]:
        raise ShapeError(f"weight expects {w.shape[1]} inputs, got {h}x{ww}")
    flat = x.reshape(h * ww, t)
    return w @ flat, {"flat": flat, "w": w, "hw": (h, ww), "live": True}


def fc_backward(cache, gy):
    if not cache.get("live"):
        raise StaleCacheError("fc cache already consumed")
    cache["live"] = False
    flat, w = cache["flat"], cache["w"]
    gy = _as_f64(gy, 2, "grad")
    gw = gy @ flat.T
    gx = (w.T @ gy).reshape(cache["hw"] + (flat.shape[1],))
    return gx, gw


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

def lstm_cell_step(x_t, h_prev, c_prev, w_x, w_h, b):
    """One standard LSTM step for 1-D state vectors.

    Gate packing along the first weight axis is [input, forget, output,
    candidate]; the cell update is c_new = f * c_prev + i * g and the hidden
    state is h_new = o * tanh(c_new).
    """
    x_t = _as_f64(x_t, 1, "input")
    h_prev = _as_f64(h_prev, 1, "hidden state")
    c_prev = _as_f64(c_prev, 1, "cell state")
    hid = h_prev.shape[0]
    if w_x.shape != (4 * hid, x_t.shape[0]) or w_h.shape != (4 * hid, hid):
        raise ShapeError("LSTM weight shapes inconsistent with state sizes")
    if b.shape != (4 * hid,):
        raise ShapeError("LSTM bias shape inconsistent with state size")
    z = w_x @ x_t + w_h @ h_prev + b
    i = sigmoid(z[:hid])
    f = sigmoid(z[hid:2 * hid])
    o = sigmoid(z[2 * hid:3 * hid])
    g = np.tanh(z[3 * hid:])
    c_new = f * c_prev + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


class LSTM:
    """Unidirectional LSTM over (batch, features, time) sequences.

    ``reverse=True`` scans right-to-left; outputs stay aligned with input
    time indices either way.
    """

    def __init__(self, in_dim: int, hidden: int, rng: SplitMix64 | None = None,
                 reverse: bool = False):
        self.in_dim = in_dim
        self.hidden = hidden
        self.reverse = reverse
        b = np.zeros(4 * hidden)
        if rng is None:
            w_x = np.zeros((4 * hidden, in_dim))
            w_h = np.zeros((4 * hidden, hidden))
        else:
            w_x = glorot_uniform(rng, (4 * hidden, in_dim), in_dim, 4 * hidden)
            w_h = glorot_uniform(rng, (4 * hidden, hidden), hidden, 4 * hidden)
            b[hidden:2 * hidden] = 1.0  # open forget gates at init
        self.w_x = Param(w_x)
        self.w_h = Param(w_h)
        self.b = Param(b)
        self._cache = None

    def named_params(self):
        return [("w_x", self.w_x), ("w_h", self.w_h), ("b", self.b)]

    def _order(self, t):
        return range(t - 1, -1, -1) if self.reverse else range(t)

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, din, t = x.shape
        if din != self.in_dim:
            raise ShapeError(f"LSTM expects {self.in_dim} input features, got {din}")
        if t < 1:
            raise ShapeError("empty sequence")
        hid = self.hidden
        # input projections for every step in one matmul: (B, T, 4H)
        zx = x.transpose(0, 2, 1) @ self.w_x.value.T
        w_h_t = np.ascontiguousarray(self.w_h.value.T)
        h = np.zeros((b, hid))
        c = np.zeros((b, hid))
        h_seq = np.zeros((b, hid, t))
        gates = np.zeros((b, 4 * hid, t))   # i, f, o, g after activation
        tanh_c = np.zeros((b, hid, t))
        h_prev = np.zeros((b, hid, t))
        c_prev = np.zeros((b, hid, t))
        for tt in self._order(t):
            z = zx[:, tt, :] + h @ w_h_t + self.b.value
            sig = sigmoid(z[:, :3 * hid])
            i = sig[:, :hid]
            f = sig[:, hid:2 * hid]
            o = sig[:, 2 * hid:]
            g = np.tanh(z[:, 3 * hid:])
            h_prev[:, :, tt] = h
            c_prev[:, :, tt] = c
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[:, :3 * hid, tt] = sig
            gates[:, 3 * hid:, tt] = g
            tanh_c[:, :, tt] = tc
            h_seq[:, :, tt] = h
        self._cache = (x, gates, tanh_c, h_prev, c_prev)
        return h_seq

    def backward(self, gh_seq: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("LSTM.backward without live forward cache")
        x, gates, tanh_c, h_prev, c_prev = self._cache
        self._cache = None
        hid = self.hidden
        bsz, _, t = gh_seq.shape
        dz_seq = np.zeros((bsz, 4 * hid, t))
        dh = np.zeros((bsz, hid))
        dc = np.zeros((bsz, hid))
        for tt in reversed(list(self._order(t))):
            i = gates[:, :hid, tt]
            f = gates[:, hid:2 * hid, tt]
            o = gates[:, 2 * hid:3 * hid, tt]
            g = gates[:, 3 * hid:, tt]
            tc = tanh_c[:, :, tt]
            dh = dh + gh_seq[:, :, tt]
            do = dh * tc
            dcell = dc + dh * o * (1.0 - tc * tc)
            dz = dz_seq[:, :, tt]
            dz[:, :hid] = dcell * g * i * (1.0 - i)
            dz[:, hid:2 * hid] = dcell * c_prev[:, :, tt] * f * (1.0 - f)
            dz[:, 2 * hid:3 * hid] = do * o * (1.0 - o)
            dz[:, 3 * hid:] = dcell * i * (1.0 - g * g)
            dc = dcell * f
            dh = dz @ self.w_h.value
        self.w_x.grad += np.tensordot(dz_seq, x, axes=([0, 2], [0, 2]))
        self.w_h.grad += np.tensordot(dz_seq, h_prev, axes=([0, 2], [0, 2]))
        self.b.grad += dz_seq.sum(axis=(0, 2))
        gx = (dz_seq.transpose(0, 2, 1) @ self.w_x.value).transpose(0, 2, 1)
        return np.ascontiguousarray(gx)


class BiLSTM:
    """Forward and backward LSTM passes combined by a per-step linear head.

    Output step t is ``act(w_f @ h_fwd[t] + w_b @ h_bwd[t] + bias)``; the
    activation is the logistic sigmoid when the layer emits normalized
    stress directly and identity when it feeds further layers.
    """

    ACTIVATIONS = ("identity", "sigmoid", "tanh")

    def __init__(self, in_dim: int, hidden: int, out_dim: int,
                 activation: str = "identity", rng: SplitMix64 | None = None):
        if activation not in self.ACTIVATIONS:
            raise ValueError(f"unknown activation: {activation}")
        self.activation = activation
        self.out_dim = out_dim
        self.fwd = LSTM(in_dim, hidden, rng, reverse=False)
        self.bwd = LSTM(in_dim, hidden, rng, reverse=True)
        if rng is None:
            w_f = np.zeros((out_dim, hidden))
            w_b = np.zeros((out_dim, hidden))
        else:
            w_f = glorot_uniform(rng, (out_dim, hidden), hidden, out_dim)
            w_b = glorot_uniform(rng, (out_dim, hidden), hidden, out_dim)
        self.w_f = Param(w_f)
        self.w_b = Param(w_b)
        self.b_out = Param(np.zeros(out_dim))
        self._cache = None

    def named_params(self):
        out = [(f"fwd.{n}", p) for n, p in self.fwd.named_params()]
        out += [(f"bwd.{n}", p) for n, p in self.bwd.named_params()]
        out += [("w_f", self.w_f), ("w_b", self.w_b), ("b_out", self.b_out)]
        return out

    def _act(self, pre):
        if self.activation == "identity":
            return pre
        if self.activation == "sigmoid":
            return sigmoid(pre)
        return np.tanh(pre)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[2] < 1:
            raise ShapeError("empty sequence")
        hf = self.fwd.forward(x)
        hb = self.bwd.forward(x)
        pre = (self.w_f.value @ hf + self.w_b.value @ hb
               + self.b_out.value[None, :, None])
        out = self._act(pre)
        self._cache = (hf, hb, out)
        return out

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("BiLSTM.backward without live forward cache")
        hf, hb, out = self._cache
        self._cache = None
        if self.activation == "identity":
            dpre = gy
        elif self.activation == "sigmoid":
            dpre = gy * out * (1.0 - out)
        else:
            dpre = gy * (1.0 - out * out)
        self.w_f.grad += np.tensordot(dpre, hf, axes=([0, 2], [0, 2]))
        self.w_b.grad += np.tensordot(dpre, hb, axes=([0, 2], [0, 2]))
        self.b_out.grad += dpre.sum(axis=(0, 2))
        ghf = np.ascontiguousarray(self.w_f.value.T) @ dpre
        ghb = np.ascontiguousarray(self.w_b.value.T) @ dpre
        return self.fwd.backward(ghf) + self.bwd.backward(ghb)

    def forward_seq(self, x_seq: np.ndarray) -> np.ndarray:
        """Unbatched convenience: (features, time) in, (out_dim, time) out."""
        x_seq = _as_f64(x_seq, 2, "sequence")
        return self.forward(x_seq[None])[0]


class SigmoidHead:
    """Final fully connected map from one feature vector to a scalar in (0,1)."""

    def __init__(self, in_dim: int, rng: SplitMix64 | None = None):
        if rng is None:
            w = np.zeros((1, in_dim))
        else:
            w = glorot_uniform(rng, (1, in_dim), in_dim, 1)
        self.w = Param(w)
        self.b = Param(np.zeros(1))
        self._cache = None

    def named_params(self):
        return [("w", self.w), ("b", self.b)]

    def forward(self, z: np.ndarray) -> np.ndarray:
        # z: (B, D) -> (B,)
        pre = z @ self.w.value[0] + self.b.value[0]
        out = sigmoid(pre)
        self._cache = (z, out)
        return out

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StaleCacheError("SigmoidHead.backward without live cache")
        z, out = self._cache
        self._cache = None
        dpre = gy * out * (1.0 - out)
        self.w.grad[0] += dpre @ z
        self.b.grad[0] += dpre.sum()
        return np.outer(dpre, self.w.value[0])
