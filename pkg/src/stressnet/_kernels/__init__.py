"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; setting the
environment variable ``STRESSNET_PURE_PYTHON=1`` before import forces the
NumPy fallback. Both backends expose the same functions with identical
semantics (the compiled one is just faster on the small feature maps this
model works with).
"""

import os

from . import _fallback

_impl = _fallback
BACKEND = "fallback"

if os.environ.get("STRESSNET_PURE_PYTHON", "") != "1":
    try:
        from . import _core as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass

ti_conv_forward = _impl.ti_conv_forward
ti_conv_backward_kernel = _impl.ti_conv_backward_kernel
ti_conv_backward_input = _impl.ti_conv_backward_input
max_pool_forward = _impl.max_pool_forward
max_pool_backward = _impl.max_pool_backward
avg_pool_forward = _impl.avg_pool_forward
avg_pool_backward = _impl.avg_pool_backward


def backend_name() -> str:
    return BACKEND
