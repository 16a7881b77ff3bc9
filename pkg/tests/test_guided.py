"""Tests for guided backpropagation."""

import numpy as np
import pytest

from xaidesk.core.autodiff import Affine, Flatten, Relu, ReluPolicy, Softmax
from xaidesk.core.exceptions import CapabilityException
from xaidesk.core.rng import SplitMix64
from xaidesk.models.dataset import gen_shapes_dataset
from xaidesk.models.network import ModelHandle, Network, image_to_input
from xaidesk.services.guided_service import guided_backprop, input_gradient, reduce_channels


def relu_network(weight: np.ndarray) -> Network:
    return Network([Relu("relu"), Flatten("flat"), Affine("fc", weight, np.zeros(weight.shape[0])), Softmax("softmax")])


def test_affine_only_network_matches_plain_gradient():
    """Test that without ReLUs guided and standard gradients coincide."""
    rng = SplitMix64(6)
    weight = rng.uniform_array(3 * 8, -1, 1).reshape(3, 8)
    network = Network([Flatten("flat"), Affine("fc", weight, np.zeros(3)), Softmax("softmax")])
    x = rng.uniform_array(8, -1, 1).reshape(2, 2, 2)
    np.testing.assert_array_equal(
        input_gradient(network, x, 1, ReluPolicy.GUIDED), input_gradient(network, x, 1, ReluPolicy.STANDARD)
    )


def test_dead_relu_blocks_gradient():
    """Test that a negative forward input yields zero gradient under both rules."""
    network = relu_network(np.ones((2, 4)))
    x = np.full((1, 2, 2), -0.5)
    assert not input_gradient(network, x, 0, ReluPolicy.GUIDED).any()
    assert not input_gradient(network, x, 0, ReluPolicy.STANDARD).any()


def test_positive_path_is_unchanged():
    """Test bitwise equality when every forward input and upstream gradient is positive."""
    rng = SplitMix64(2)
    network = relu_network(rng.uniform_array(2 * 9, 0.1, 1.0).reshape(2, 9))
    x = rng.uniform_array(9, 0.1, 1.0).reshape(1, 3, 3)
    np.testing.assert_array_equal(
        input_gradient(network, x, 0, ReluPolicy.GUIDED), input_gradient(network, x, 0, ReluPolicy.STANDARD)
    )


def test_negative_upstream_is_suppressed():
    """Test that guided backprop drops negative gradients at a live ReLU."""
    network = relu_network(np.array([[1.0, -1.0], [0.0, 0.0]]))
    x = np.array([[[0.5, 0.5]]])
    np.testing.assert_array_equal(input_gradient(network, x, 0, ReluPolicy.STANDARD)[0, 0], [1.0, -1.0])
    np.testing.assert_array_equal(input_gradient(network, x, 0, ReluPolicy.GUIDED)[0, 0], [1.0, 0.0])


def test_guided_support_within_standard_support(network):
    """Test on 20 images that guided input gradients are nonzero only where standard ones are."""
    for sample in gen_shapes_dataset(20, 3):
        x = image_to_input(sample.image)
        guided = input_gradient(network, x, sample.label, ReluPolicy.GUIDED)
        standard = input_gradient(network, x, sample.label, ReluPolicy.STANDARD)
        assert not np.any((guided != 0) & (standard == 0))


def test_reduced_map_range(model, disk_image):
    """Test that the channel-reduced map is max-normalized into [0, 1]."""
    result = guided_backprop(model, disk_image, 0)
    assert result.gradient.shape == (3, 64, 64)
    assert result.reduced.shape == (64, 64)
    assert result.reduced.min() >= 0.0
    if result.max_before_normalize > 0:
        assert result.reduced.max() == pytest.approx(1.0)
    dead = ~np.any(result.gradient != 0, axis=0)
    assert not result.reduced[dead].any()


def test_reduce_channels_all_zero():
    """Test that an all-zero gradient stays all-zero."""
    assert not reduce_channels(np.zeros((3, 4, 4))).any()


def test_reduce_channels_uses_largest_magnitude():
    """Test per-pixel max of absolute values across channels."""
    gradient = np.array([[[0.5]], [[-2.0]], [[1.0]]])
    np.testing.assert_array_equal(reduce_channels(gradient), [[1.0]])


def test_deterministic(model, disk_image):
    """Test identical results on repeated calls."""
    first = guided_backprop(model, disk_image, 3)
    second = guided_backprop(model, disk_image, 3)
    np.testing.assert_array_equal(first.gradient, second.gradient)


def test_opaque_model_rejected(disk_image):
    """Test that an opaque model raises a capability error."""
    model = ModelHandle.opaque(lambda image: np.array([0.5, 0.5]))
    with pytest.raises(CapabilityException):
        guided_backprop(model, disk_image, 0)
