"""Grad-CAM class activation maps."""

import logging
from typing import Optional, Tuple

import numpy as np

from xaidesk.config import settings
from xaidesk.core.autodiff import ReluPolicy, backward
from xaidesk.core.exceptions import InvalidArgumentException
from xaidesk.models.network import Network, as_network, image_to_input
from xaidesk.schemas.explanation import GradCamResult
from xaidesk.utils.validators import validate_class_index, validate_image

logger = logging.getLogger(__name__)


def upsample_bilinear(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """
    Bilinear resize with half-pixel centres.

    Source coordinate of output index d is (d + 0.5) * in / out - 0.5,
    clamped to the border; the output range stays within the input range.

    Raises:
        InvalidArgumentException: On empty input or output dimensions.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or min(values.shape) < 1:
        raise InvalidArgumentException(f"Expected a non-empty 2-D map, got shape {values.shape}")
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentException(f"Output dimensions must be positive, got {out_h}x{out_w}")
    in_h, in_w = values.shape
    y0, y1, fy = _source_axis(in_h, out_h)
    x0, x1, fx = _source_axis(in_w, out_w)
    top = values[y0][:, x0] * (1 - fx) + values[y0][:, x1] * fx
    bottom = values[y1][:, x0] * (1 - fx) + values[y1][:, x1] * fx
    return top * (1 - fy)[:, None] + bottom * fy[:, None]


def _source_axis(size_in: int, size_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    source = (np.arange(size_out) + 0.5) * (size_in / size_out) - 0.5
    source = np.clip(source, 0.0, size_in - 1)
    lower = np.floor(source).astype(int)
    upper = np.minimum(lower + 1, size_in - 1)
    return lower, upper, source - lower


def gradcam_from_input(
        network: Network,
        x: np.ndarray,
        class_index: int,
        tap_layer: str,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Raw Grad-CAM map of a network input.

    alpha_k is the spatial mean of d logit_c / dA^k over the tapped
    activation; raw = ReLU(sum_k alpha_k A^k).

    Returns:
        tuple: (raw map at tap resolution, alphas, max of raw).
    """
    _, logits, tape = network.forward(x, taps=[tap_layer])
    validate_class_index(class_index, logits.size)
    gradients = backward(tape, class_index, ReluPolicy.STANDARD)
    activation, activation_grad = gradients.tap(tap_layer)
    if activation.ndim != 3:
        raise InvalidArgumentException(
            f"Layer '{tap_layer}' is not a convolutional-stage activation (shape {activation.shape})"
        )
    alphas = activation_grad.mean(axis=(1, 2))
    raw = np.maximum(np.tensordot(alphas, activation, axes=1), 0.0)
    return raw, alphas, float(raw.max())


def gradcam_heatmap(
        model,
        image: np.ndarray,
        class_index: int,
        tap_layer: Optional[str] = None,
) -> GradCamResult:
    """
    Grad-CAM heatmap for one image.

    The raw map is max-normalized at tap resolution and then upsampled to
    the image size; an all-zero raw map stays all-zero.

    Args:
        model: Network or gradient-capable ModelHandle.
        image: uint8 RGB image.
        class_index: Class whose logit is differentiated.
        tap_layer: Activation to explain; the last conv-stage ReLU by default.

    Returns:
        GradCamResult: Raw and normalized maps with the channel weights.

    Raises:
        CapabilityException: If model is opaque.
    """
    network = as_network(model)
    validate_image(image)
    tap_layer = tap_layer or settings.GRADCAM_TAP
    raw, alphas, peak = gradcam_from_input(network, image_to_input(image), class_index, tap_layer)
    scaled = raw / peak if peak > 0 else np.zeros_like(raw)
    normalized = np.clip(upsample_bilinear(scaled, image.shape[0], image.shape[1]), 0.0, 1.0)
    logger.info(f"Grad-CAM on '{tap_layer}' {raw.shape}: class {class_index}, peak {peak:.4g}")
    return GradCamResult(
        raw=raw,
        normalized=normalized,
        alphas=alphas,
        tap_layer=tap_layer,
        class_index=class_index,
        max_before_normalize=peak,
    )
