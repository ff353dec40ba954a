"""Tensor helpers, RNG reproducibility, and the finite-difference checker."""

import numpy as np
import pytest

from wendnet.tensor import (
    ShapeError,
    add,
    finite_diff_check,
    make_rng,
    matmul,
    mul,
    reduce_norm,
    relative_error,
    scale,
    sub,
    substream,
)


def test_matmul_identity():
    rng = make_rng(1)
    x = rng.standard_normal((3, 5))
    np.testing.assert_array_equal(matmul(np.eye(3), x), x)


def test_matmul_hand_computed():
    out = matmul([[1, 2], [3, 4]], [[1], [1]])
    np.testing.assert_array_equal(out, [[3], [7]])


def test_matmul_zeros():
    out = matmul(np.zeros((2, 3)), np.ones((3, 4)))
    np.testing.assert_array_equal(out, np.zeros((2, 4)))


def test_matmul_dimension_mismatch():
    with pytest.raises(ShapeError):
        matmul(np.zeros((2, 3)), np.zeros((4, 2)))


def test_matmul_transpose_property():
    rng = make_rng(2)
    a = rng.standard_normal((5, 4))
    b = rng.standard_normal((4, 3))
    np.testing.assert_allclose(matmul(a, b).T, matmul(b.T, a.T), atol=1e-12)


def test_elementwise_ops():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(add(x, np.zeros_like(x)), x)
    np.testing.assert_array_equal(mul(x, np.ones_like(x)), x)
    np.testing.assert_array_equal(sub(x, x), np.zeros_like(x))
    np.testing.assert_array_equal(scale(np.array([1.0, 2.0, 3.0]), 2.0), [2, 4, 6])


def test_bias_broadcast_only():
    x = np.zeros((2, 3))
    np.testing.assert_array_equal(add(x, np.array([1.0, 2.0, 3.0])),
                                  np.tile([1.0, 2.0, 3.0], (2, 1)))
    with pytest.raises(ShapeError):
        add(x, np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        mul(x, np.array([1.0, 2.0, 3.0]))


def test_reduce_norm():
    np.testing.assert_allclose(reduce_norm(np.array([[3.0, 4.0]]), axis=-1), [[5.0]])
    assert reduce_norm(np.zeros((2, 3)), axis=1).sum() == 0.0
    np.testing.assert_allclose(reduce_norm(np.eye(4)[0:1], axis=-1), [[1.0]])
    with pytest.raises(ShapeError):
        reduce_norm(np.zeros((2, 2)), axis=3)


def test_reduce_norm_nonnegative_zero_iff_zero_slice():
    rng = make_rng(3)
    x = rng.standard_normal((10, 4))
    x[3] = 0.0
    norms = reduce_norm(x, axis=1)[:, 0]
    assert np.all(norms >= 0)
    assert norms[3] == 0.0
    assert np.all(norms[np.arange(10) != 3] > 0)


def test_rng_reproducibility():
    a = make_rng(12345).standard_normal(10_000)
    b = make_rng(12345).standard_normal(10_000)
    np.testing.assert_array_equal(a, b)


def test_substreams_independent_of_order():
    a1 = substream(7, "net", "relu").standard_normal(5)
    b1 = substream(7, "net", "tanh").standard_normal(5)
    b2 = substream(7, "net", "tanh").standard_normal(5)
    np.testing.assert_array_equal(b1, b2)
    assert not np.array_equal(a1, b1)


def test_finite_diff_linear_map_is_exact():
    rng = make_rng(4)
    a = rng.standard_normal((4, 4))
    # central differences are exact for linear maps at any step; a larger
    # step keeps the rounding contribution below the bound
    err = finite_diff_check(lambda x: a @ x, np.ones(4),
                            lambda v: a @ v, probes=20, step=1e-3, rng=make_rng(5))
    assert err < 1e-10


def test_finite_diff_quadratic():
    err = finite_diff_check(lambda x: x * x, np.array([1.0]),
                            lambda v: 2.0 * v, probes=5, step=1e-6, rng=make_rng(6))
    assert err < 1e-9


def test_finite_diff_flags_wrong_gradient():
    err = finite_diff_check(lambda x: x * x, np.array([1.0]),
                            lambda v: 2.2 * v, probes=5, step=1e-6, rng=make_rng(7))
    assert 0.05 < err < 0.15


def test_relative_error_scale():
    assert relative_error(np.array([2.0]), np.array([2.0])) == 0.0
    assert relative_error(np.array([1e-9]), np.array([0.0])) == pytest.approx(1e-9)
