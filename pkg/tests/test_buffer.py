"""Buffer layer: frozen random projection plus the two activations."""

import math

import numpy as np
import pytest

from dsal.buffer import (
    ACTIVATIONS,
    BufferLayer,
    activate_comp,
    activate_main,
    new_buffer,
)
from dsal.errors import ShapeError
from dsal.oracle import matmul_naive


def test_same_seed_same_projection():
    a = new_buffer(8, 32, seed=5)
    b = new_buffer(8, 32, seed=5)
    assert np.array_equal(a.projection, b.projection)
    c = new_buffer(8, 32, seed=6)
    assert not np.array_equal(a.projection, c.projection)


def test_zero_dimension_rejected():
    with pytest.raises(ValueError):
        new_buffer(8, 0, seed=1)
    with pytest.raises(ValueError):
        new_buffer(0, 8, seed=1)


def test_projection_mean_shrinks_with_size():
    # law of large numbers on the drawn entries
    buf = new_buffer(8, 32, seed=1)
    assert abs(buf.projection.mean()) <= 4.0 / math.sqrt(8 * 32)


def test_projection_is_frozen():
    buf = new_buffer(4, 4, seed=0)
    with pytest.raises(ValueError):
        buf.projection[0, 0] = 1.0


def test_unknown_activation_rejected():
    with pytest.raises(ValueError, match="unknown activation"):
        new_buffer(2, 2, seed=0, sigma_main="swish")


def test_identity_projection_passthrough():
    buf = BufferLayer(np.eye(3), sigma_main="identity", sigma_comp="identity", seed=0)
    x = np.array([[1.0, -2.0, 3.0]])
    np.testing.assert_array_equal(activate_main(buf, x), x)


def test_relu_clips_negative_products():
    buf = BufferLayer(np.eye(2), sigma_main="relu", sigma_comp="tanh", seed=0)
    np.testing.assert_array_equal(activate_main(buf, [[-1.0, 2.0]]), [[0.0, 2.0]])


def test_tanh_fixed_point_and_saturation():
    buf = BufferLayer(np.eye(1), sigma_main="relu", sigma_comp="tanh", seed=0)
    np.testing.assert_array_equal(activate_comp(buf, [[0.0]]), [[0.0]])
    big = activate_comp(buf, [[5.0]])
    assert 0.999 < big[0, 0] < 1.0


def test_same_sigma_same_output(rng):
    buf = new_buffer(6, 10, seed=3, sigma_main="tanh", sigma_comp="tanh")
    x = rng.standard_normal((5, 6))
    assert np.array_equal(activate_main(buf, x), activate_comp(buf, x))


def test_activation_matches_naive_product(rng):
    buf = new_buffer(7, 9, seed=4, sigma_main="relu", sigma_comp="tanh")
    x = rng.standard_normal((6, 7))
    want_main = np.maximum(matmul_naive(x, buf.projection), 0.0)
    want_comp = np.tanh(matmul_naive(x, buf.projection))
    np.testing.assert_allclose(activate_main(buf, x), want_main, atol=1e-12)
    np.testing.assert_allclose(activate_comp(buf, x), want_comp, atol=1e-12)


def test_dimension_mismatch_rejected():
    buf = new_buffer(4, 8, seed=0)
    with pytest.raises(ShapeError):
        activate_main(buf, np.zeros((2, 5)))
    with pytest.raises(ShapeError):
        activate_main(buf, np.zeros(4))


def test_repeated_calls_bit_identical(rng):
    buf = new_buffer(5, 12, seed=9)
    x = rng.standard_normal((4, 5))
    assert np.array_equal(activate_main(buf, x), activate_main(buf, x))


@pytest.mark.parametrize("name", sorted(ACTIVATIONS))
def test_activations_finite_for_extreme_inputs(name, rng):
    x = rng.standard_normal((40, 3)) * 30.0
    buf = new_buffer(3, 5, seed=2, sigma_main=name, sigma_comp=name)
    out = activate_main(buf, x)
    assert np.all(np.isfinite(out))
    if name == "relu":
        assert np.all(out >= 0.0)


def test_bounded_activations_stay_in_open_range():
    # strict bounds checked below the float64 saturation threshold
    buf = BufferLayer(np.eye(1), "tanh", "sigmoid", seed=0)
    x = np.linspace(-8.0, 8.0, 33).reshape(-1, 1)
    out_tanh = activate_main(buf, x)
    out_sig = activate_comp(buf, x)
    assert np.all((out_tanh > -1.0) & (out_tanh < 1.0))
    assert np.all((out_sig > 0.0) & (out_sig < 1.0))


def test_mish_and_hardswish_known_values():
    # mish(0) = 0, hardswish(0) = 0, hardswish(3) = 3, hardswish(-3) = 0
    buf_m = BufferLayer(np.eye(1), "mish", "mish", seed=0)
    buf_h = BufferLayer(np.eye(1), "hardswish", "hardswish", seed=0)
    assert activate_main(buf_m, [[0.0]])[0, 0] == 0.0
    np.testing.assert_allclose(
        activate_main(buf_m, [[1.0]])[0, 0], math.tanh(math.log(1 + math.e)), rtol=1e-12
    )
    assert activate_main(buf_h, [[0.0]])[0, 0] == 0.0
    assert activate_main(buf_h, [[3.0]])[0, 0] == 3.0
    assert activate_main(buf_h, [[-3.0]])[0, 0] == 0.0
