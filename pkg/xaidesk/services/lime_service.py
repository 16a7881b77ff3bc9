"""
LIME over superpixels.

Masks are sampled around the instance, scored by the black box, weighted
by a proximity kernel on the fraction of absent superpixels, and fitted
with a weighted ridge surrogate. Sparsity is a hard top-k selection
followed by a refit on the kept features.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from xaidesk.core.exceptions import (
    IllConditionedException,
    InvalidArgumentException,
)
from xaidesk.core.rng import SplitMix64
from xaidesk.models.network import ModelHandle
from xaidesk.schemas.explanation import LimeConfig, LimeExplanation
from xaidesk.services.segmentation_service import Segmentation, apply_mask
from xaidesk.utils.validators import validate_class_index

logger = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_MAX = 1e-6


def sample_masks(region_count: int, n: int, seed: int) -> np.ndarray:
    """
    Draw n coalition masks; row 0 is the all-present anchor.

    Rows 1..n-1 are i.i.d. Bernoulli(0.5) per bit, drawn row-major from
    SplitMix64(seed) as uniform doubles compared against 0.5.

    Returns:
        np.ndarray: Boolean (n, K) array.
    """
    if n < 2:
        raise InvalidArgumentException("LIME needs at least two masks")
    masks = np.ones((n, region_count), dtype=bool)
    masks[1:] = SplitMix64(seed).float_array((n - 1) * region_count).reshape(n - 1, region_count) < 0.5
    return masks


def exhaustive_masks(region_count: int) -> np.ndarray:
    """All 2^K masks, all-present first, then the rest in integer order."""
    full = (1 << region_count) - 1
    order = [full] + [bits for bits in range(full)]
    return ((np.asarray(order)[:, None] >> np.arange(region_count)) & 1).astype(bool)


def proximity_weight(mask: np.ndarray, sigma: float) -> float:
    """exp(-d^2 / sigma^2) with d the fraction of absent superpixels."""
    mask = np.asarray(mask, dtype=bool)
    distance = np.count_nonzero(~mask) / mask.size
    return float(np.exp(-(distance ** 2) / sigma ** 2))


def fit_weighted_ridge(X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """
    Solve (X'WX + lambda I')beta = X'Wy by Cholesky.

    Column 0 of X is the intercept and is not penalized. When the
    factorization fails, jitter starting at 1e-12 is added to the diagonal
    and grown tenfold up to 1e-6.

    Args:
        X: (n, K+1) design, intercept column first.
        y: n responses.
        w: n nonnegative weights, not all zero.
        ridge_lambda: Ridge strength.

    Returns:
        np.ndarray: K+1 coefficients, intercept first.

    Raises:
        InvalidArgumentException: On bad weights or shapes.
        IllConditionedException: If the system stays singular at maximum jitter.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],) or w.shape != y.shape:
        raise InvalidArgumentException("Design, responses and weights have inconsistent shapes")
    if np.any(w < 0) or not np.any(w > 0):
        raise InvalidArgumentException("Weights must be nonnegative and not all zero")
    if ridge_lambda < 0:
        raise InvalidArgumentException("Ridge lambda must be nonnegative")

    gram, rhs = normal_equations(X, y, w, ridge_lambda)
    jitter = 0.0
    while True:
        try:
            factor = linalg.cho_factor(gram + jitter * np.eye(len(gram)), lower=True, check_finite=True)
            beta = linalg.cho_solve(factor, rhs)
            if np.all(np.isfinite(beta)):
                if jitter:
                    logger.debug(f"Cholesky succeeded with jitter {jitter:g}")
                return beta
        except linalg.LinAlgError:
            pass
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX * (1 + 1e-9):
            raise IllConditionedException(f"Normal equations singular after jitter {JITTER_MAX:g}")


def normal_equations(X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge_lambda: float):
    """X'WX + lambda I' (intercept slot unpenalized) and X'Wy."""
    weighted = X * w[:, None]
    gram = X.T @ weighted
    penalty = np.full(X.shape[1], ridge_lambda)
    penalty[0] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    return gram, weighted.T @ y


def weighted_r_squared(X: np.ndarray, y: np.ndarray, w: np.ndarray, beta: np.ndarray) -> float:
    residual = y - X @ beta
    mean = np.average(y, weights=w)
    total = float(np.sum(w * (y - mean) ** 2))
    explained = float(np.sum(w * residual ** 2))
    if total == 0.0:
        return 1.0 if explained <= 1e-24 else -np.inf
    return 1.0 - explained / total


def _design(masks: np.ndarray, columns: Optional[Sequence[int]] = None) -> np.ndarray:
    features = masks.astype(np.float64) if columns is None else masks[:, list(columns)].astype(np.float64)
    return np.column_stack([np.ones(len(masks)), features])


def evaluate_masks(
        model: ModelHandle,
        image: np.ndarray,
        segmentation: Segmentation,
        masks: np.ndarray,
        class_index: int,
        baseline,
        workers: int = 1,
) -> np.ndarray:
    """Class probability for every masked image, in mask order."""

    def score(mask: np.ndarray) -> float:
        return model.probability(apply_mask(image, segmentation, mask, baseline), class_index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.fromiter(pool.map(score, masks), dtype=np.float64, count=len(masks))
    return np.fromiter((score(mask) for mask in masks), dtype=np.float64, count=len(masks))


def explain_lime(
        model: ModelHandle,
        image: np.ndarray,
        segmentation: Segmentation,
        class_index: int,
        config: Optional[LimeConfig] = None,
        workers: int = 1,
) -> LimeExplanation:
    """
    Explain one prediction with a sparse local linear surrogate.

    Args:
        model: Black box.
        image: Instance to explain.
        segmentation: Superpixel feature space.
        class_index: Class whose probability is regressed.
        config: Sampling and surrogate settings.
        workers: Threads for mask evaluation; results are assembled in mask order.

    Returns:
        LimeExplanation: Refit coefficients over the top-k superpixels.
    """
    config = config or LimeConfig()
    region_count = segmentation.region_count
    try:
        config.validate_for(region_count)
    except ValueError as e:
        raise InvalidArgumentException(str(e))
    validate_class_index(class_index, model.class_count(image))

    if config.sampling == "exhaustive":
        masks = exhaustive_masks(region_count)
    else:
        masks = sample_masks(region_count, config.n_samples, config.seed)
    responses = evaluate_masks(model, image, segmentation, masks, class_index, config.baseline, workers)
    weights = np.array([proximity_weight(mask, config.kernel_width) for mask in masks])

    full_beta = fit_weighted_ridge(_design(masks), responses, weights, config.ridge_lambda)
    spread = masks.astype(np.float64).std(axis=0)
    scores = np.abs(full_beta[1:]) * spread
    selected = sorted(int(i) for i in np.argsort(-scores, kind="stable")[:config.top_k])

    design = _design(masks, selected)
    beta = fit_weighted_ridge(design, responses, weights, config.ridge_lambda)
    coefficients = np.zeros(region_count)
    coefficients[selected] = beta[1:]
    r_squared = weighted_r_squared(design, responses, weights, beta)
    logger.info(f"LIME: {len(masks)} model calls, kept {selected}, weighted R^2 {r_squared:.4f}")
    return LimeExplanation(
        coefficients=coefficients,
        intercept=float(beta[0]),
        r_squared=float(r_squared),
        selected=selected,
        class_index=class_index,
        model_calls=len(masks),
        config=config,
    )


def lime_stability(
        model: ModelHandle,
        image: np.ndarray,
        segmentation: Segmentation,
        class_index: int,
        config: LimeConfig,
        seeds: Sequence[int],
        workers: int = 1,
) -> float:
    """
    Mean pairwise Jaccard overlap of the top-k sets selected under different seeds.

    1.0 means every run kept the same superpixels.
    """
    if len(seeds) < 2:
        raise InvalidArgumentException("Stability needs at least two seeds")
    selections: List[set] = []
    for seed in seeds:
        try:
            run_config = config.model_copy(update={"seed": int(seed)})
        except ValidationError as e:
            raise InvalidArgumentException(str(e))
        explanation = explain_lime(model, image, segmentation, class_index, run_config, workers)
        selections.append(set(explanation.selected))
    overlaps = [len(a & b) / len(a | b) for a, b in itertools.combinations(selections, 2)]
    return float(np.mean(overlaps))
