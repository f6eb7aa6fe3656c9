"""NumPy implementations of the hot convolution and pooling kernels.

These define the reference semantics. The compiled extension in ``_core.pyx``
mirrors them; both operate on batched stacks shaped (batch, height, width,
time) with a shared (d, d, time) kernel that never mixes time channels.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def ti_conv_forward(x, k):
    # x: (B, H, W, T), k: (d, d, T) -> (B, H-d+1, W-d+1, T)
    d = k.shape[0]
    v = sliding_window_view(x, (d, d), axis=(1, 2))
    return np.einsum("bijtac,act->bijt", v, k, optimize=True)


def ti_conv_backward_kernel(x, gy, d):
    v = sliding_window_view(x, (d, d), axis=(1, 2))
    return np.einsum("bijtac,bijt->act", v, gy, optimize=True)


def ti_conv_backward_input(k, gy, h, w):
    # Full correlation of the output gradient with the 180-degree-flipped
    # kernel recovers the input gradient of a valid correlation.
    d = k.shape[0]
    pad = d - 1
    gyp = np.pad(gy, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    v = sliding_window_view(gyp, (d, d), axis=(1, 2))
    kf = np.ascontiguousarray(k[::-1, ::-1, :])
    return np.einsum("bijtac,act->bijt", v, kf, optimize=True)


def max_pool_forward(x, d):
    b, h, w, t = x.shape
    hb, wb = h // d, w // d
    blocks = (x.reshape(b, hb, d, wb, d, t)
               .transpose(0, 1, 3, 5, 2, 4)
               .reshape(b, hb, wb, t, d * d))
    # argmax returns the first maximum in row-major block order, which is the
    # tie rule the backward pass relies on.
    idx = blocks.argmax(axis=-1).astype(np.int64)
    y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def max_pool_backward(gy, idx, d, h, w):
    b, hb, wb, t = gy.shape
    scat = np.zeros((b, hb, wb, t, d * d), dtype=np.float64)
    np.put_along_axis(scat, idx[..., None], gy[..., None], axis=-1)
    gx = (scat.reshape(b, hb, wb, t, d, d)
              .transpose(0, 1, 4, 2, 5, 3)
              .reshape(b, h, w, t))
    return np.ascontiguousarray(gx)


def avg_pool_forward(x, d):
    b, h, w, t = x.shape
    hb, wb = h // d, w // d
    return x.reshape(b, hb, d, wb, d, t).mean(axis=(2, 4))


def avg_pool_backward(gy, d, h, w):
    scale = gy / float(d * d)
    return np.ascontiguousarray(
        np.repeat(np.repeat(scale, d, axis=1), d, axis=2))
