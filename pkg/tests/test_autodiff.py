"""Tests for the random stream and reverse-mode differentiation."""

import numpy as np
import pytest

from xaidesk.core.autodiff import (
    Affine,
    ComputationTape,
    Conv2d,
    Flatten,
    MaxPool2,
    Relu,
    ReluPolicy,
    Softmax,
    Tensor,
    backward,
    forward,
    grad_check,
    relu_backward,
    softmax,
)
from xaidesk.core.exceptions import (
    DimensionException,
    NumericException,
    SeedIndexException,
    TapeStateException,
)
from xaidesk.core.rng import SplitMix64
from xaidesk.models.network import Network
from xaidesk.services.verification_service import parameter_gradient_errors, verify_gradients


def test_splitmix_reference_value():
    """Test the first draw of seed 0 against the published SplitMix64 output."""
    assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF


def test_splitmix_bulk_matches_scalar():
    """Test that vectorized draws equal repeated scalar draws and leave the same state."""
    bulk, scalar = SplitMix64(42), SplitMix64(42)
    values = bulk.next_u64_array(100)
    assert [int(v) for v in values] == [scalar.next_u64() for _ in range(100)]
    assert bulk.next_u64() == scalar.next_u64()


def test_splitmix_ranges():
    """Test float and bounded integer ranges."""
    rng = SplitMix64(5)
    floats = rng.float_array(10_000)
    assert floats.min() >= 0.0 and floats.max() < 1.0
    assert all(3 <= rng.integer(3, 7) <= 7 for _ in range(1000))
    assert sorted(rng.permutation(10)) == list(range(10))


def _naive_conv(x, weight, bias, pad):
    out_c, _, k, _ = weight.shape
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h = x.shape[1] + 2 * pad - k + 1
    w = x.shape[2] + 2 * pad - k + 1
    out = np.zeros((out_c, h, w))
    for o in range(out_c):
        for i in range(h):
            for j in range(w):
                out[o, i, j] = np.sum(padded[:, i:i + k, j:j + k] * weight[o]) + bias[o]
    return out


def test_conv_matches_naive_loop():
    """Test im2col convolution against a direct loop."""
    rng = SplitMix64(1)
    x = rng.float_array(2 * 5 * 6).reshape(2, 5, 6)
    weight = rng.uniform_array(3 * 2 * 3 * 3, -1, 1).reshape(3, 2, 3, 3)
    bias = rng.float_array(3)
    out, _ = Conv2d("c", weight, bias).forward(x)
    np.testing.assert_allclose(out, _naive_conv(x, weight, bias, 1), atol=1e-12)


def test_conv_all_ones_kernel_on_constant_map():
    """Test that a padded 3x3 all-ones kernel gives 9c inside and 4c at the corners."""
    c = 2.5
    out, _ = Conv2d("c", np.ones((1, 1, 3, 3)), np.zeros(1), pad=1).forward(np.full((1, 6, 6), c))
    assert out.shape == (1, 6, 6)
    np.testing.assert_allclose(out[0, 1:-1, 1:-1], 9 * c)
    assert out[0, 0, 0] == out[0, 0, -1] == out[0, -1, 0] == out[0, -1, -1] == pytest.approx(4 * c)
    assert out[0, 0, 3] == pytest.approx(6 * c)


def test_softmax_sums_to_one_and_is_positive():
    """Test normalization and strict positivity on random and extreme logits."""
    rng = SplitMix64(4)
    for scale in (1.0, 50.0, 700.0):
        probabilities = softmax(rng.uniform_array(4, -scale, scale))
        assert abs(probabilities.sum() - 1.0) <= 1e-12
        assert np.all(probabilities > 0)


def test_softmax_shift_invariance():
    """Test that adding a constant to every logit leaves the output unchanged."""
    logits = SplitMix64(5).uniform_array(4, -3, 3)
    for shift in (-100.0, 0.5, 1e3):
        np.testing.assert_allclose(softmax(logits + shift), softmax(logits), rtol=0, atol=1e-12)


def test_maxpool_tie_goes_to_first_in_row_major_order():
    """Test that a tied window routes the gradient to its top-left element."""
    x = np.ones((1, 2, 2))
    pool = MaxPool2("p")
    out, saved = pool.forward(x)
    grad, _ = pool.backward(np.array([[[1.0]]]), saved, ReluPolicy.STANDARD)
    assert out[0, 0, 0] == 1.0
    np.testing.assert_array_equal(grad[0], [[1.0, 0.0], [0.0, 0.0]])


def test_relu_policies_on_random_sites():
    """Test both ReLU rules on 100000 random sites."""
    rng = SplitMix64(8)
    x = rng.uniform_array(100_000, -1, 1)
    g = rng.uniform_array(100_000, -1, 1)
    standard = relu_backward(x, g, ReluPolicy.STANDARD)
    guided = relu_backward(x, g, ReluPolicy.GUIDED)
    np.testing.assert_array_equal(standard, np.where(x > 0, g, 0.0))
    np.testing.assert_array_equal(guided, np.where((x > 0) & (g > 0), g, 0.0))
    assert np.all(guided >= 0)


def test_backward_on_empty_tape():
    """Test that backward before any forward is rejected."""
    with pytest.raises(TapeStateException):
        backward(ComputationTape(), 0)


def test_seed_index_out_of_range(small_network: Network):
    """Test that a seed outside the logits is rejected."""
    _, _, tape = small_network.forward(np.zeros(small_network.input_shape))
    with pytest.raises(SeedIndexException):
        backward(tape, 4)


def test_dimension_error_names_layer():
    """Test that a shape mismatch reports the offending layer."""
    layer = Affine("fc9", np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(DimensionException) as exc:
        forward(layer, Tensor(np.zeros(4)), ComputationTape())
    assert "fc9" in exc.value.detail
    assert exc.value.exit_code == 2


def test_non_finite_input_rejected():
    """Test that NaN inputs raise a numeric error."""
    layer = Relu("r")
    with pytest.raises(NumericException):
        forward(layer, Tensor(np.array([np.nan])), ComputationTape())


def test_linear_network_input_gradient_is_exact():
    """Test grad_check on an affine-only network, where the logit is linear."""
    rng = SplitMix64(4)
    weight = rng.uniform_array(3 * 12, -1, 1).reshape(3, 12)
    network = Network([Flatten("flat"), Affine("fc", weight, np.zeros(3)), Softmax("softmax")])

    def logit(x):
        return network.predict(x)[1][1]

    def gradient(x):
        _, _, tape = network.forward(x)
        return backward(tape, 1).input_grad

    point = rng.float_array(12).reshape(3, 2, 2)
    assert grad_check(logit, gradient, point) <= 1e-8
    np.testing.assert_allclose(gradient(point).reshape(-1), weight[1], atol=1e-12)


def test_parameter_gradients_match_finite_differences(small_network: Network):
    """Test backprop parameter gradients against central differences on sampled weights."""
    rng = SplitMix64(21)
    x = rng.float_array(3 * 16 * 16).reshape(3, 16, 16)
    coordinates = [("conv1.weight", i) for i in range(0, 108, 9)]
    coordinates += [("conv2.weight", i) for i in range(0, 288, 29)]
    coordinates += [("fc1.weight", i) for i in range(0, 2048, 97)]
    coordinates += [("fc2.weight", i) for i in range(64)]
    errors = parameter_gradient_errors(small_network, x, 2, coordinates)
    assert len(errors) > len(coordinates) // 2
    assert max(errors) <= 1e-6


def test_gradient_suite_over_ten_networks():
    """Test the full gradient agreement suite on ten seeded reduced networks."""
    result = verify_gradients()
    assert result.cases >= 400
    assert result.passed


def test_backward_fills_tape_gradients(small_network: Network):
    """Test that tapped activations come back with gradients of matching shape."""
    _, _, tape = small_network.forward(np.full(small_network.input_shape, 0.5), taps=["relu2"])
    gradients = backward(tape, 0)
    activation, grad = gradients.tap("relu2")
    assert activation.shape == grad.shape == (8, 8, 8)
    assert set(gradients.parameters) == set(small_network.parameters())
    assert all(t.grad is not None for t in tape.tensors[:-1])
