"""Plain SGD training and accuracy evaluation for the toy CNN."""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from xaidesk.core.autodiff import backward
from xaidesk.core.exceptions import (
    InvalidArgumentException,
    NumericException,
    TrainingDivergedException,
)
from xaidesk.core.rng import SplitMix64
from xaidesk.models.dataset import Sample
from xaidesk.models.network import Network, image_to_input, predicted_class

logger = logging.getLogger(__name__)


def sample_step(network: Network, sample: Sample) -> Tuple[float, dict]:
    """Cross-entropy loss of one sample and its parameter gradients."""
    probabilities, logits, tape = network.forward(image_to_input(sample.image))
    # d(-log p_y)/d logits = p - onehot(y)
    upstream = probabilities.copy()
    upstream[sample.label] -= 1.0
    loss = float(logsumexp(logits) - logits[sample.label])
    return loss, backward(tape, upstream).parameters


def train(
        network: Network,
        samples: Sequence[Sample],
        epochs: int,
        lr: float,
        seed: int,
) -> Tuple[Network, List[float]]:
    """
    Train with batch-size-1 SGD on cross-entropy.

    Epoch e visits the samples in the order of a SplitMix64(seed + e)
    permutation.

    Args:
        network: Starting point; left untouched.
        samples: Training data.
        epochs: Passes over the data.
        lr: Learning rate; 0 leaves the parameters unchanged.
        seed: Base seed of the visiting order.

    Returns:
        tuple: (trained network, mean loss per epoch).

    Raises:
        TrainingDivergedException: If the loss or a parameter becomes non-finite.
    """
    if epochs < 1 or not samples:
        raise InvalidArgumentException("Training needs at least one epoch and one sample")
    if lr < 0 or not math.isfinite(lr):
        raise InvalidArgumentException(f"Learning rate must be finite and non-negative, got {lr}")
    params = {name: value.copy() for name, value in network.parameters().items()}
    losses: List[float] = []
    for epoch in range(epochs):
        order = SplitMix64(seed + epoch).permutation(len(samples))
        total = 0.0
        for index in order:
            try:
                loss, grads = sample_step(network, samples[index])
            except NumericException:
                raise TrainingDivergedException(epoch, lr)
            if not math.isfinite(loss):
                raise TrainingDivergedException(epoch, lr)
            for name, grad in grads.items():
                params[name] = params[name] - lr * grad
            if not all(np.all(np.isfinite(value)) for value in params.values()):
                raise TrainingDivergedException(epoch, lr)
            network = network.with_parameters(params)
            total += loss
        losses.append(total / len(samples))
        logger.info(f"Epoch {epoch + 1}/{epochs}: mean loss {losses[-1]:.4f}")
    return network, losses


def evaluate_accuracy(network: Network, samples: Sequence[Sample]) -> float:
    """Fraction of samples whose argmax prediction equals the label."""
    if not samples:
        raise InvalidArgumentException("Cannot evaluate on an empty sample set")
    correct = sum(
        predicted_class(network.predict(image_to_input(sample.image))[0]) == sample.label for sample in samples
    )
    return correct / len(samples)
