import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stressnet.errors import DomainError, ShapeError
from stressnet.tensor import Tensor, matmul, reduce_max


def test_reshape_preserves_data_order():
    t = Tensor(np.arange(1.0, 7.0).reshape(2, 3))
    r = t.reshape((3, 2))
    assert r.shape == (3, 2)
    assert r.data.ravel().tolist() == [1, 2, 3, 4, 5, 6]


def test_reshape_window_stack():
    t = Tensor(np.zeros((24, 16, 10)))
    assert t.reshape((384, 10)).shape == (384, 10)


def test_reshape_product_mismatch():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2))).reshape((3, 1))


def test_slice_channel_zeros():
    t = Tensor(np.zeros((2, 2, 2)))
    s = t.slice_channel(axis=2, index=1)
    assert s.shape == (2, 2)
    assert not s.data.any()


def test_slice_channel_values():
    t = Tensor(np.array([[[1.0, 2.0, 3.0]]]))
    s = t.slice_channel(axis=2, index=0)
    assert s.shape == (1, 1)
    assert s.data[0, 0] == 1.0


def test_slice_channel_out_of_range():
    t = Tensor(np.zeros((2, 2, 3)))
    with pytest.raises(IndexError):
        t.slice_channel(axis=2, index=5)


def test_matmul_identity():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    eye = Tensor(np.eye(2))
    assert np.array_equal((eye @ a).data, a.data)


def test_matmul_derived_value():
    # independent arithmetic: [1,2] . [3,4]^T = 1*3 + 2*4 = 11
    got = matmul(Tensor(np.array([[1.0, 2.0]])), Tensor(np.array([[3.0], [4.0]])))
    assert got.data.tolist() == [[11.0]]


def test_matmul_inner_dim_mismatch():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


def test_reduce_max():
    assert reduce_max(Tensor(np.array([[-1.0, 0.0], [3.0, 2.0]]))) == 3.0


def test_elementwise_requires_equal_shapes():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2))) + Tensor(np.zeros((2, 3)))


def test_elementwise_ops():
    a = Tensor(np.array([1.0, 2.0]))
    b = Tensor(np.array([3.0, 5.0]))
    assert (a + b).data.tolist() == [4.0, 7.0]
    assert (b - a).data.tolist() == [2.0, 3.0]
    assert (a * b).data.tolist() == [3.0, 10.0]


def test_nonfinite_rejected():
    with pytest.raises(DomainError):
        Tensor(np.array([1.0, np.inf]))


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=24))
def test_reshape_round_trip_bit_identical(values):
    n = len(values)
    t = Tensor(np.array(values))
    shapes = [(n,), (1, n), (n, 1)]
    for shape in shapes:
        back = t.reshape(shape).reshape((n,))
        assert np.array_equal(back.data, t.data)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_matmul_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (Tensor(rng.uniform(-1, 1, (3, 3))) for _ in range(3))
    left = ((a @ b) @ c).data
    right = (a @ (b @ c)).data
    assert np.allclose(left, right, rtol=1e-9, atol=1e-12)


@given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=30))
def test_reduce_max_bounds(values):
    t = Tensor(np.array(values))
    m = t.reduce_max()
    assert all(m >= v for v in values)
    assert m in values
