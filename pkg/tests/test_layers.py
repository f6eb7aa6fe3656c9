import numpy as np
import pytest
from util import grad_check_params, max_rel_err, numeric_grad

from stressnet.errors import ShapeError, StaleCacheError
from stressnet.layers import (LSTM, AvgPool, BiLSTM, FullyConnected, MaxPool,
                              SigmoidHead, TIConv, avg_pool_forward,
                              fc_backward, fc_forward, lstm_cell_step,
                              max_pool_backward, max_pool_forward, sigmoid,
                              ti_conv_backward, ti_conv_forward)
from stressnet.rng import SplitMix64


def _rand(shape, seed):
    return np.random.default_rng(seed).uniform(-1, 1, shape)


# ---------------------------------------------------------------------------
# temporal-independent convolution
# ---------------------------------------------------------------------------

def test_conv_zero_input_gives_zero_output():
    y, _ = ti_conv_forward(np.zeros((5, 5, 2)), _rand((3, 3, 2), 0))
    assert y.shape == (3, 3, 2)
    assert not y.any()


def test_conv_ones_matches_direct_sum():
    y, _ = ti_conv_forward(np.ones((3, 3, 1)), np.ones((3, 3, 1)))
    assert y.shape == (1, 1, 1)
    assert y[0, 0, 0] == 9.0


def test_conv_matches_brute_force_double_sum():
    x = _rand((6, 5, 3), 1)
    k = _rand((2, 2, 3), 2)
    y, _ = ti_conv_forward(x, k)
    # independent brute-force evaluation
    for i in range(5):
        for j in range(4):
            for t in range(3):
                acc = sum(k[a, c, t] * x[i + a, j + c, t]
                          for a in range(2) for c in range(2))
                assert abs(y[i, j, t] - acc) < 1e-12


def test_conv_channel_independence_bit_for_bit():
    x = _rand((4, 4, 2), 3)
    k = _rand((2, 2, 2), 4)
    y0, _ = ti_conv_forward(x, k)
    x2 = x.copy()
    x2[:, :, 0] += 1.0  # perturb channel 0 only
    y1, _ = ti_conv_forward(x2, k)
    assert np.array_equal(y0[:, :, 1], y1[:, :, 1])
    assert not np.array_equal(y0[:, :, 0], y1[:, :, 0])


def test_conv_output_spatial_shape():
    for h, w, d in [(8, 6, 3), (5, 5, 5), (24, 16, 5)]:
        y, _ = ti_conv_forward(np.zeros((h, w, 2)), np.zeros((d, d, 2)))
        assert y.shape == (h - d + 1, w - d + 1, 2)


def test_conv_rejects_oversized_kernel_and_depth_mismatch():
    with pytest.raises(ShapeError):
        ti_conv_forward(np.zeros((2, 2, 1)), np.zeros((3, 3, 1)))
    with pytest.raises(ShapeError):
        ti_conv_forward(np.zeros((5, 5, 2)), np.zeros((3, 3, 3)))


def test_conv_backward_zero_grad():
    y, cache = ti_conv_forward(_rand((5, 5, 2), 5), _rand((2, 2, 2), 6))
    gx, gk = ti_conv_backward(cache, np.zeros_like(y))
    assert not gx.any() and not gk.any()


def test_conv_backward_single_patch():
    # 1x1 output: grad_k is the input patch scaled by the upstream value
    x = _rand((3, 3, 1), 7)
    k = _rand((3, 3, 1), 8)
    _, cache = ti_conv_forward(x, k)
    gy = np.full((1, 1, 1), 2.5)
    gx, gk = ti_conv_backward(cache, gy)
    assert np.allclose(gk, x * 2.5)
    assert np.allclose(gx, k * 2.5)


def test_conv_backward_matches_finite_differences():
    x = _rand((5, 5, 3), 9)
    k = _rand((2, 2, 3), 10)
    proj = _rand((4, 4, 3), 11)
    _, cache = ti_conv_forward(x, k)
    gx, gk = ti_conv_backward(cache, proj)
    num_x = numeric_grad(lambda a: float((ti_conv_forward(a, k)[0] * proj).sum()), x.copy())
    num_k = numeric_grad(lambda a: float((ti_conv_forward(x, a)[0] * proj).sum()), k.copy())
    assert max_rel_err(gx, num_x) < 1e-6
    assert max_rel_err(gk, num_k) < 1e-6


def test_conv_stale_cache():
    _, cache = ti_conv_forward(np.zeros((3, 3, 1)), np.zeros((2, 2, 1)))
    ti_conv_backward(cache, np.zeros((2, 2, 1)))
    with pytest.raises(StaleCacheError):
        ti_conv_backward(cache, np.zeros((2, 2, 1)))


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def test_pool_single_block():
    x = np.array([[0.0, 0.0], [0.0, 1.0]]).reshape(2, 2, 1)
    ymax, _ = max_pool_forward(x, 2)
    yavg, _ = avg_pool_forward(x, 2)
    assert ymax[0, 0, 0] == 1.0
    assert yavg[0, 0, 0] == 0.25


def test_pool_constant_input():
    x = np.full((4, 4, 2), 3.25)
    ymax, _ = max_pool_forward(x, 2)
    yavg, _ = avg_pool_forward(x, 2)
    assert np.all(ymax == 3.25) and np.all(yavg == 3.25)


def test_pool_preserves_single_crack_pixel():
    x = np.zeros((8, 8, 1))
    x[5, 2, 0] = 1.0
    y, _ = max_pool_forward(x, 8)
    assert y[0, 0, 0] == 1.0


def test_pool_divisibility_error():
    with pytest.raises(ShapeError):
        max_pool_forward(np.zeros((5, 4, 1)), 2)


def test_max_pool_monotone():
    rng = np.random.default_rng(12)
    x = rng.uniform(-1, 1, (6, 6, 2))
    y0, _ = max_pool_forward(x, 2)
    for _ in range(20):
        x2 = x.copy()
        i, j, t = rng.integers(6), rng.integers(6), rng.integers(2)
        x2[i, j, t] += rng.uniform(0, 2)
        y1, _ = max_pool_forward(x2, 2)
        assert np.all(y1 >= y0)


def test_max_pool_backward_routes_to_argmax():
    x = np.array([[1.0, 4.0], [2.0, 3.0]]).reshape(2, 2, 1)
    y, cache = max_pool_forward(x, 2)
    gx = max_pool_backward(cache, np.full((1, 1, 1), 5.0))
    expect = np.zeros((2, 2, 1))
    expect[0, 1, 0] = 5.0
    assert np.array_equal(gx, expect)


def test_pool_gradients_match_finite_differences():
    for pool_cls, seed in [(MaxPool, 20), (AvgPool, 21)]:
        x = _rand((1, 6, 4, 3), seed)
        proj = _rand((1, 3, 2, 3), seed + 1)
        pool = pool_cls(2)
        pool.forward(x)
        gx = pool.backward(proj)
        num = numeric_grad(
            lambda a: float((pool_cls(2).forward(a) * proj).sum()), x.copy())
        assert max_rel_err(gx, num) < 1e-6


# ---------------------------------------------------------------------------
# fully connected
# ---------------------------------------------------------------------------

def test_fc_identity_weight_returns_flattened_channels():
    x = _rand((2, 3, 4), 30)
    y, _ = fc_forward(x, np.eye(6))
    assert np.allclose(y, x.reshape(6, 4))


def test_fc_zero_input():
    y, _ = fc_forward(np.zeros((3, 2, 5)), _rand((4, 6), 31))
    assert not y.any()


def test_fc_sum_weights():
    # input column [a; b] with weight row [1, 1] -> a + b
    x = np.array([[[2.0]], [[3.0]]])  # shape (2, 1, 1)
    y, _ = fc_forward(x, np.array([[1.0, 1.0]]))
    assert y.shape == (1, 1)
    assert y[0, 0] == 5.0


def test_fc_dimension_mismatch():
    with pytest.raises(ShapeError):
        fc_forward(np.zeros((3, 3, 2)), np.zeros((4, 8)))


def test_fc_gradients_match_finite_differences():
    x = _rand((4, 3, 2), 32)
    w = _rand((5, 12), 33)
    proj = _rand((5, 2), 34)
    _, cache = fc_forward(x, w)
    gx, gw = fc_backward(cache, proj)
    num_x = numeric_grad(lambda a: float((fc_forward(a, w)[0] * proj).sum()), x.copy())
    num_w = numeric_grad(lambda a: float((fc_forward(x, a)[0] * proj).sum()), w.copy())
    assert max_rel_err(gx, num_x) < 1e-6
    assert max_rel_err(gw, num_w) < 1e-6


# ---------------------------------------------------------------------------
# LSTM cell and sequence layers
# ---------------------------------------------------------------------------

def test_lstm_cell_zero_params_zero_hidden():
    x = _rand((3,), 40)
    h, c = lstm_cell_step(x, np.zeros(4), np.zeros(4),
                          np.zeros((16, 3)), np.zeros((16, 4)), np.zeros(16))
    assert not h.any()
    # candidate tanh(0) = 0, so the cell state only decays toward i*g = 0
    assert np.allclose(c, 0.0)


def test_lstm_cell_saturated_forget_gate_keeps_state():
    hid = 4
    c_prev = _rand((hid,), 41)
    b = np.zeros(4 * hid)
    b[hid:2 * hid] = 50.0  # forget gate pinned open
    h, c = lstm_cell_step(np.zeros(2), np.zeros(hid), c_prev,
                          np.zeros((4 * hid, 2)), np.zeros((4 * hid, hid)), b)
    assert np.allclose(c, c_prev, atol=1e-9)


def test_lstm_cell_shape_errors():
    with pytest.raises(ShapeError):
        lstm_cell_step(np.zeros(2), np.zeros(4), np.zeros(4),
                       np.zeros((16, 3)), np.zeros((16, 4)), np.zeros(16))


def test_lstm_gradients_match_finite_differences():
    rng = SplitMix64(42)
    layer = LSTM(3, 4, rng)
    x = _rand((1, 3, 5), 43)
    proj = _rand((1, 4, 5), 44)

    def forward_scalar():
        return float((layer.forward(x) * proj).sum())

    forward_scalar()
    for _, p in layer.named_params():
        p.zero_grad()
    layer.forward(x)
    gx = layer.backward(proj)
    # parameter gradients
    err = grad_check_params(forward_scalar, [p for _, p in layer.named_params()])
    assert err < 1e-6
    # input gradient
    num = numeric_grad(lambda a: float((layer.forward(a) * proj).sum()), x.copy())
    assert max_rel_err(gx, num) < 1e-6


def test_lstm_stale_cache():
    layer = LSTM(2, 3, SplitMix64(1))
    x = _rand((1, 2, 4), 45)
    layer.forward(x)
    layer.backward(np.zeros((1, 3, 4)))
    with pytest.raises(StaleCacheError):
        layer.backward(np.zeros((1, 3, 4)))


# ---------------------------------------------------------------------------
# BiLSTM
# ---------------------------------------------------------------------------

def test_bilstm_single_step_sequence():
    layer = BiLSTM(2, 3, 4, "identity", SplitMix64(50))
    out = layer.forward_seq(_rand((2, 1), 51))
    assert out.shape == (4, 1)
    assert np.all(np.isfinite(out))


def test_bilstm_zero_everything_outputs_bias():
    layer = BiLSTM(2, 3, 4, "sigmoid")  # zero params
    out = layer.forward_seq(np.zeros((2, 5)))
    assert np.allclose(out, sigmoid(0.0))  # = 0.5 per step


def test_bilstm_empty_sequence_rejected():
    layer = BiLSTM(2, 3, 4)
    with pytest.raises(ShapeError):
        layer.forward(np.zeros((1, 2, 0)))


def _swap_directions(layer):
    for a, b in [(layer.fwd.w_x, layer.bwd.w_x), (layer.fwd.w_h, layer.bwd.w_h),
                 (layer.fwd.b, layer.bwd.b), (layer.w_f, layer.w_b)]:
        tmp = a.value.copy()
        a.value[...] = b.value
        b.value[...] = tmp


def test_bilstm_time_reversal_symmetry():
    layer = BiLSTM(2, 3, 4, "tanh", SplitMix64(52))
    x = _rand((2, 6), 53)
    out = layer.forward_seq(x)
    _swap_directions(layer)
    out_rev = layer.forward_seq(x[:, ::-1].copy())
    assert np.allclose(out_rev, out[:, ::-1], atol=1e-12)


def test_bilstm_gradients_match_finite_differences():
    layer = BiLSTM(2, 3, 4, "tanh", SplitMix64(54))
    x = _rand((1, 2, 5), 55)
    proj = _rand((1, 4, 5), 56)

    def forward_scalar():
        return float((layer.forward(x) * proj).sum())

    layer.forward(x)
    for _, p in layer.named_params():
        p.zero_grad()
    layer.forward(x)
    gx = layer.backward(proj)
    err = grad_check_params(forward_scalar, [p for _, p in layer.named_params()])
    assert err < 1e-6
    num = numeric_grad(lambda a: float((layer.forward(a) * proj).sum()), x.copy())
    assert max_rel_err(gx, num) < 1e-6


def test_sigmoid_head_gradients():
    head = SigmoidHead(5, SplitMix64(60))
    z = _rand((3, 5), 61)
    proj = _rand((3,), 62)

    def forward_scalar():
        return float((head.forward(z) * proj).sum())

    forward_scalar()
    for _, p in head.named_params():
        p.zero_grad()
    head.forward(z)
    gz = head.backward(proj)
    err = grad_check_params(forward_scalar, [p for _, p in head.named_params()])
    assert err < 1e-6
    num = numeric_grad(lambda a: float((head.forward(a) * proj).sum()), z.copy())
    assert max_rel_err(gz, num) < 1e-6


# ---------------------------------------------------------------------------
# layer classes: 10-seed sweep at the coarser whole-suite tolerance
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_ticonv_class_gradcheck_sweep(seed):
    layer = TIConv(3, 2, SplitMix64(seed))
    x = _rand((1, 6, 5, 2), seed + 300)
    proj = _rand((1, 4, 3, 2), seed + 400)

    def forward_scalar():
        return float((layer.forward(x) * proj).sum())

    forward_scalar()
    layer.kernel.zero_grad()
    layer.forward(x)
    gx = layer.backward(proj)
    assert grad_check_params(forward_scalar, [layer.kernel]) < 1e-4
    num = numeric_grad(lambda a: float((layer.forward(a) * proj).sum()), x.copy())
    assert max_rel_err(gx, num) < 1e-4
