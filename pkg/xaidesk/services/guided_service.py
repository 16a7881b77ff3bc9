"""Guided backpropagation saliency."""

import logging

import numpy as np

from xaidesk.core.autodiff import ReluPolicy, backward
from xaidesk.models.network import Network, as_network, image_to_input
from xaidesk.schemas.explanation import GuidedBackpropResult
from xaidesk.utils.validators import validate_class_index, validate_image

logger = logging.getLogger(__name__)


def input_gradient(
        network: Network,
        x: np.ndarray,
        class_index: int,
        policy: ReluPolicy = ReluPolicy.GUIDED,
) -> np.ndarray:
    """Gradient of logit class_index with respect to the network input."""
    _, logits, tape = network.forward(x)
    validate_class_index(class_index, logits.size)
    return backward(tape, class_index, policy).input_grad


def reduce_channels(gradient: np.ndarray) -> np.ndarray:
    """Per-pixel max of |gradient| over channels, max-normalized to [0, 1]."""
    reduced = np.abs(gradient).max(axis=0)
    peak = reduced.max()
    return reduced / peak if peak > 0 else np.zeros_like(reduced)


def guided_backprop(model, image: np.ndarray, class_index: int) -> GuidedBackpropResult:
    """
    Guided-backprop input relevance for one image.

    At every ReLU the gradient passes only where both the forward input
    and the upstream gradient are positive.

    Raises:
        CapabilityException: If model is opaque.
    """
    network = as_network(model)
    validate_image(image)
    gradient = input_gradient(network, image_to_input(image), class_index, ReluPolicy.GUIDED)
    peak = float(np.abs(gradient).max()) if gradient.size else 0.0
    logger.info(f"Guided backprop: class {class_index}, {np.count_nonzero(gradient)} nonzero input gradients")
    return GuidedBackpropResult(
        gradient=gradient,
        reduced=reduce_channels(gradient),
        class_index=class_index,
        max_before_normalize=peak,
    )
