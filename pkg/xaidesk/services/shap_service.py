"""
Shapley values over superpixel coalitions.

The game is v(S) = p(class | image with superpixels outside S replaced by
the baseline). Exact mode enumerates all 2^K coalitions once and combines
marginals with |S|!(K-|S|-1)!/K! weights computed from log-gamma
differences. Monte-Carlo mode averages marginals along SplitMix64
Fisher-Yates orderings.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Optional

import numpy as np
from scipy.special import gammaln

from xaidesk.core.exceptions import (
    BudgetException,
    InternalConsistencyException,
    InvalidArgumentException,
)
from xaidesk.core.rng import SplitMix64
from xaidesk.models.network import ModelHandle
from xaidesk.schemas.explanation import EXACT_K_CEILING, ShapConfig, ShapleyAttribution
from xaidesk.schemas.segmentation import Baseline
from xaidesk.services.segmentation_service import Segmentation, apply_mask, mask_from_int
from xaidesk.utils.validators import validate_class_index

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-9
MC_STANDARD_ERRORS = 4.0

Game = Callable[[np.ndarray], float]


def coalition_value(
        model: ModelHandle,
        image: np.ndarray,
        segmentation: Segmentation,
        mask: np.ndarray,
        baseline: Optional[Baseline],
        class_index: int,
) -> float:
    """Probability of class_index when only the superpixels in mask are kept."""
    return model.probability(apply_mask(image, segmentation, mask, baseline), class_index)


def shapley_weights(region_count: int) -> np.ndarray:
    """Weight of a coalition of size s (s = 0..K-1) not containing the player."""
    sizes = np.arange(region_count)
    return np.exp(gammaln(sizes + 1) + gammaln(region_count - sizes) - gammaln(region_count + 1))


def enumerate_game(value_fn: Game, region_count: int, workers: int = 1) -> np.ndarray:
    """Value of every coalition, indexed by its bit pattern."""
    masks = [mask_from_int(bits, region_count) for bits in range(1 << region_count)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(value_fn, masks))
    else:
        values = [value_fn(mask) for mask in masks]
    return np.asarray(values, dtype=np.float64)


def combine_exact(values: np.ndarray, region_count: int) -> np.ndarray:
    """Shapley vector from a full table of coalition values."""
    bits = np.arange(1 << region_count)
    sizes = np.zeros_like(bits)
    for player in range(region_count):
        sizes += (bits >> player) & 1
    weights = shapley_weights(region_count)
    phi = np.empty(region_count)
    for player in range(region_count):
        flag = 1 << player
        without = bits[(bits & flag) == 0]
        phi[player] = np.sum(weights[sizes[without]] * (values[without | flag] - values[without]))
    return phi


def exact_shapley(
        value_fn: Game,
        region_count: int,
        limit: int = 12,
        workers: int = 1,
) -> np.ndarray:
    """
    Exact Shapley values by subset enumeration.

    Every coalition is evaluated exactly once.

    Args:
        value_fn: Game over boolean masks of length K.
        region_count: Number of players K.
        limit: Largest K accepted (at most 20).
        workers: Threads for coalition evaluation.

    Returns:
        np.ndarray: Shapley vector of length K.

    Raises:
        BudgetException: If K exceeds limit.
    """
    if region_count < 1:
        raise InvalidArgumentException("A game needs at least one player")
    if region_count > min(limit, EXACT_K_CEILING):
        raise BudgetException(
            f"Exact Shapley needs 2^{region_count} coalitions (limit K <= {limit}); use Monte-Carlo mode"
        )
    return combine_exact(enumerate_game(value_fn, region_count, workers), region_count)


def mc_shapley(value_fn: Game, region_count: int, n_permutations: int, seed: int) -> ShapleyAttribution:
    """
    Monte-Carlo Shapley values from random orderings.

    Each ordering comes from SplitMix64(seed) Fisher-Yates; the marginal
    v(S + i) - v(S) is recorded for every player along the prefix walk.
    Coalition values are memoized by bit pattern.

    Returns:
        ShapleyAttribution: Mean marginals with standard errors std / sqrt(n).
    """
    if n_permutations < 1:
        raise InvalidArgumentException("n_permutations must be >= 1")
    memo: Dict[int, float] = {}

    def value(bits: int) -> float:
        if bits not in memo:
            memo[bits] = float(value_fn(mask_from_int(bits, region_count)))
        return memo[bits]

    rng = SplitMix64(seed)
    marginals = np.empty((n_permutations, region_count))
    for walk in range(n_permutations):
        bits = 0
        previous = value(0)
        for player in rng.permutation(region_count):
            bits |= 1 << player
            current = value(bits)
            marginals[walk, player] = current - previous
            previous = current
    if n_permutations > 1:
        errors = marginals.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    else:
        errors = np.zeros(region_count)
    return ShapleyAttribution(
        values=marginals.mean(axis=0),
        v_full=value((1 << region_count) - 1),
        v_empty=value(0),
        standard_errors=errors,
        model_calls=len(memo),
        mode="mc",
    )


def explain_shap(
        model: ModelHandle,
        image: np.ndarray,
        segmentation: Segmentation,
        class_index: int,
        config: Optional[ShapConfig] = None,
        workers: int = 1,
) -> ShapleyAttribution:
    """
    Shapley attribution of one prediction over superpixels.

    Raises:
        BudgetException: Exact mode with K above the configured limit.
        InternalConsistencyException: If efficiency fails beyond tolerance.
    """
    config = config or ShapConfig()
    region_count = segmentation.region_count
    validate_class_index(class_index, model.class_count(image))

    def game(mask: np.ndarray) -> float:
        return coalition_value(model, image, segmentation, mask, config.baseline, class_index)

    if config.mode == "exact":
        if region_count > config.exact_k_limit:
            raise BudgetException(
                f"Exact SHAP with K={region_count} exceeds exact_k_limit={config.exact_k_limit}; "
                f"use --shap-mode mc"
            )
        values = enumerate_game(game, region_count, workers)
        attribution = ShapleyAttribution(
            values=combine_exact(values, region_count),
            v_full=float(values[-1]),
            v_empty=float(values[0]),
            model_calls=len(values),
            mode="exact",
        )
        tolerance = EXACT_TOLERANCE
    else:
        attribution = mc_shapley(game, region_count, config.n_permutations, config.seed)
        spread = float(np.sqrt(np.sum(attribution.standard_errors ** 2)))
        tolerance = MC_STANDARD_ERRORS * spread + EXACT_TOLERANCE

    if attribution.efficiency_gap > tolerance:
        raise InternalConsistencyException(
            f"Shapley efficiency violated: gap {attribution.efficiency_gap:.3e} > {tolerance:.3e}"
        )
    attribution.class_index = class_index
    logger.info(f"SHAP ({config.mode}): {attribution.model_calls} model calls, K={region_count}")
    return attribution
