"""Backend agreement: compiled kernels must match the NumPy fallback."""

import numpy as np
import pytest

from stressnet._kernels import _fallback, backend_name

try:
    from stressnet._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def _rand(shape, seed):
    return np.random.default_rng(seed).uniform(-1, 1, shape)


@needs_core
@pytest.mark.parametrize("seed", range(5))
def test_conv_forward_agrees(seed):
    x = _rand((3, 9, 7, 4), seed)
    k = _rand((3, 3, 4), seed + 100)
    a = _fallback.ti_conv_forward(x, k)
    b = _core.ti_conv_forward(x, k)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_core
@pytest.mark.parametrize("seed", range(5))
def test_conv_backward_agrees(seed):
    x = _rand((2, 8, 6, 3), seed)
    k = _rand((2, 2, 3), seed + 50)
    gy = _rand((2, 7, 5, 3), seed + 200)
    gk_a = _fallback.ti_conv_backward_kernel(x, gy, 2)
    gk_b = _core.ti_conv_backward_kernel(x, gy, 2)
    gx_a = _fallback.ti_conv_backward_input(k, gy, 8, 6)
    gx_b = _core.ti_conv_backward_input(k, gy, 8, 6)
    assert np.allclose(gk_a, gk_b, rtol=1e-12, atol=1e-14)
    assert np.allclose(gx_a, gx_b, rtol=1e-12, atol=1e-14)


@needs_core
@pytest.mark.parametrize("seed", range(5))
def test_max_pool_agrees_including_argmax(seed):
    x = _rand((2, 8, 6, 3), seed)
    ya, ia = _fallback.max_pool_forward(x, 2)
    yb, ib = _core.max_pool_forward(x, 2)
    assert np.array_equal(ya, yb)
    assert np.array_equal(ia, ib)
    gy = _rand(ya.shape, seed + 1)
    assert np.array_equal(_fallback.max_pool_backward(gy, ia, 2, 8, 6),
                          _core.max_pool_backward(gy, ib, 2, 8, 6))


@needs_core
def test_max_pool_tie_breaks_to_first_row_major():
    x = np.zeros((1, 2, 2, 1))
    x[0, :, :, 0] = [[5.0, 5.0], [5.0, 5.0]]
    _, ia = _fallback.max_pool_forward(x, 2)
    _, ib = _core.max_pool_forward(x, 2)
    assert ia[0, 0, 0, 0] == 0
    assert ib[0, 0, 0, 0] == 0


@needs_core
@pytest.mark.parametrize("seed", range(3))
def test_avg_pool_agrees(seed):
    x = _rand((2, 6, 4, 2), seed)
    a = _fallback.avg_pool_forward(x, 2)
    b = _core.avg_pool_forward(x, 2)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    gy = _rand(a.shape, seed + 9)
    assert np.allclose(_fallback.avg_pool_backward(gy, 2, 6, 4),
                       _core.avg_pool_backward(gy, 2, 6, 4),
                       rtol=1e-12, atol=1e-15)


def test_backend_reports_a_name():
    assert backend_name() in ("compiled", "fallback")
