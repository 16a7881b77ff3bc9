"""Tests for Grad-CAM and bilinear upsampling."""

import numpy as np
import pytest

from xaidesk.core.autodiff import Affine, Flatten, Relu, Softmax
from xaidesk.core.exceptions import CapabilityException, InvalidArgumentException
from xaidesk.models.network import ModelHandle, Network, image_to_input
from xaidesk.services.gradcam_service import gradcam_from_input, gradcam_heatmap, upsample_bilinear


def tap_network(row: np.ndarray) -> Network:
    """relu tap followed by a linear head whose logit 0 reads row."""
    weight = np.vstack([row.reshape(-1), np.zeros(row.size)])
    return Network([Relu("tap"), Flatten("flat"), Affine("fc", weight, np.zeros(2)), Softmax("softmax")])


def test_unit_weights_return_activation():
    """Test that a summing head gives alpha = 1 and raw = A."""
    activation = np.arange(1.0, 17.0).reshape(1, 4, 4)
    raw, alphas, peak = gradcam_from_input(tap_network(np.ones(16)), activation, 0, "tap")
    np.testing.assert_allclose(alphas, [1.0])
    np.testing.assert_allclose(raw, activation[0])
    assert peak == 16.0


def test_negative_weights_are_clipped():
    """Test that a negated head yields an all-zero map."""
    activation = np.arange(1.0, 17.0).reshape(1, 4, 4)
    raw, alphas, peak = gradcam_from_input(tap_network(-np.ones(16)), activation, 0, "tap")
    np.testing.assert_allclose(alphas, [-1.0])
    assert not raw.any()
    assert peak == 0.0


def test_channel_weights_combine_additively():
    """Test alpha per channel and the weighted channel sum."""
    activation = np.stack([np.full((2, 2), 0.5), np.eye(2) + 0.1])
    row = np.concatenate([np.ones(4), np.full(4, 2.0)])
    raw, alphas, _ = gradcam_from_input(tap_network(row), activation, 0, "tap")
    np.testing.assert_allclose(alphas, [1.0, 2.0])
    np.testing.assert_allclose(raw, activation[0] + 2.0 * activation[1])


def test_alphas_match_uniform_channel_shift(network, disk_image):
    """Test each alpha against a central difference of shifting its whole channel."""
    x = image_to_input(disk_image)
    _, alphas, _ = gradcam_from_input(network, x, 1, "relu2")
    _, _, tape = network.forward(x, taps=["relu2"])
    activation = tape.output_of("relu2").data
    epsilon = 1e-4
    area = activation.shape[1] * activation.shape[2]
    for channel in range(0, activation.shape[0], 4):
        up, down = activation.copy(), activation.copy()
        up[channel] += epsilon
        down[channel] -= epsilon
        slope = (network.forward_tail("relu2", up)[1] - network.forward_tail("relu2", down)[1]) / (2 * epsilon)
        assert alphas[channel] == pytest.approx(slope / area, rel=1e-5, abs=1e-9)


def test_heatmap_shapes_and_range(model, disk_image):
    """Test tap-resolution raw map and image-resolution normalized map."""
    result = gradcam_heatmap(model, disk_image, 0)
    assert result.raw.shape == (32, 32)
    assert result.normalized.shape == (64, 64)
    assert result.normalized.min() >= 0.0 and result.normalized.max() <= 1.0
    assert result.tap_layer == "relu2"
    assert np.all(result.raw >= 0)


def test_class_logit_scaling_leaves_map_unchanged(network, disk_image):
    """Test that scaling one class's logit rescales raw but not the normalized map."""
    params = dict(network.parameters())
    weight = params["fc2.weight"].copy()
    weight[2] *= 3.0
    params["fc2.weight"] = weight
    scaled = network.with_parameters(params)
    base = gradcam_heatmap(network, disk_image, 2)
    boosted = gradcam_heatmap(scaled, disk_image, 2)
    np.testing.assert_allclose(boosted.raw, 3.0 * base.raw, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(boosted.normalized, base.normalized, atol=1e-12)


def test_dense_tap_rejected(network, disk_image):
    """Test that a rank-1 activation cannot host a class activation map."""
    with pytest.raises(InvalidArgumentException):
        gradcam_from_input(network, image_to_input(disk_image), 0, "fc1")


def test_opaque_model_rejected(disk_image):
    """Test that an opaque model cannot be explained with gradients."""
    model = ModelHandle.opaque(lambda image: np.array([0.5, 0.5]))
    with pytest.raises(CapabilityException) as exc:
        gradcam_heatmap(model, disk_image, 0)
    assert exc.value.exit_code == 4


def test_upsample_constant():
    """Test that a constant map stays constant."""
    out = upsample_bilinear(np.full((3, 5), 0.7), 64, 64)
    np.testing.assert_allclose(out, 0.7)


def test_upsample_identity():
    """Test that equal sizes reproduce the input."""
    values = np.arange(12.0).reshape(3, 4)
    np.testing.assert_allclose(upsample_bilinear(values, 3, 4), values)


def test_upsample_half_pixel_centres():
    """Test 2x2 to 4x4 interpolation with half-pixel centres."""
    out = upsample_bilinear(np.array([[0.0, 1.0], [1.0, 0.0]]), 4, 4)
    np.testing.assert_allclose(out[1:3, 1:3], [[0.375, 0.625], [0.625, 0.375]])
    assert out[0, 0] == 0.0 and out[0, 3] == 1.0
    assert out.mean() == pytest.approx(0.5)


def test_upsample_stays_in_input_range():
    """Test that interpolation never leaves [min, max] of the input."""
    values = np.random.default_rng(3).uniform(-2, 5, size=(7, 9))
    out = upsample_bilinear(values, 50, 33)
    assert out.min() >= values.min() and out.max() <= values.max()


def test_upsample_rejects_empty_dimensions():
    """Test zero-sized inputs and outputs."""
    with pytest.raises(InvalidArgumentException):
        upsample_bilinear(np.zeros((0, 3)), 4, 4)
    with pytest.raises(InvalidArgumentException):
        upsample_bilinear(np.zeros((2, 2)), 0, 4)
