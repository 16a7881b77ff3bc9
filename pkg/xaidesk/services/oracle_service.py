"""
Brute-force reference implementations.

These are naive and share no code with the primary paths
they check: permutation enumeration for Shapley values, central
differences for gradients, and Gaussian elimination for weighted ridge.
"""

import itertools
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from xaidesk.core.exceptions import (
    InvalidArgumentException,
    NumericException,
    SingularMatrixException,
)
from xaidesk.schemas.oracle import OracleBudget

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-14
CHUNK = 4096


def permutation_shapley(
        value_fn: Callable[[np.ndarray], float],
        region_count: int,
        budget: Optional[OracleBudget] = None,
) -> np.ndarray:
    """
    Average marginal contributions over all K! orderings.

    Orderings are enumerated lexicographically; coalition values are
    memoized by bit pattern. Sums are taken chunk by chunk with fsum so
    the result does not depend on accumulation drift.

    Args:
        value_fn: Game over boolean masks of length K.
        region_count: Number of players K.
        budget: Enumeration limits (K <= 10 by default).

    Returns:
        np.ndarray: Shapley vector of length K.

    Raises:
        BudgetException: If K exceeds the budget.
    """
    (budget or OracleBudget()).check_bits(region_count)
    if region_count < 1:
        raise InvalidArgumentException("A game needs at least one player")
    memo: Dict[int, float] = {}

    def value(bits: int) -> float:
        if bits not in memo:
            mask = ((bits >> np.arange(region_count)) & 1).astype(bool)
            memo[bits] = float(value_fn(mask))
        return memo[bits]

    partials: List[List[float]] = [[] for _ in range(region_count)]
    chunk: List[List[float]] = [[] for _ in range(region_count)]
    walks = 0
    for order in itertools.permutations(range(region_count)):
        bits = 0
        previous = value(0)
        for player in order:
            bits |= 1 << player
            current = value(bits)
            chunk[player].append(current - previous)
            previous = current
        walks += 1
        if walks % CHUNK == 0:
            for player in range(region_count):
                partials[player].append(math.fsum(chunk[player]))
                chunk[player] = []
    for player in range(region_count):
        partials[player].append(math.fsum(chunk[player]))
    logger.debug(f"Permutation oracle: {walks} walks, {len(memo)} coalitions")
    return np.array([math.fsum(p) / walks for p in partials])


def finite_diff(
        function: Callable[[np.ndarray], float],
        point: np.ndarray,
        epsilon: float = 1e-5,
        budget: Optional[OracleBudget] = None,
        coordinates: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Central differences (f(x + e) - f(x - e)) / 2e per coordinate.

    Args:
        function: Scalar function of an array.
        point: Evaluation point; never modified.
        epsilon: Step size.
        budget: Coordinate limit.
        coordinates: Flat indices to differentiate; all coordinates when omitted.

    Returns:
        np.ndarray: Gradient shaped like point, or one value per requested coordinate.

    Raises:
        NumericException: If an evaluation is non-finite.
        BudgetException: If too many coordinates are requested.
    """
    if epsilon <= 0:
        raise InvalidArgumentException("epsilon must be positive")
    point = np.asarray(point, dtype=np.float64)
    indices = range(point.size) if coordinates is None else list(coordinates)
    (budget or OracleBudget()).check_coordinates(len(indices))

    shifted = point.copy()
    flat = shifted.reshape(-1)
    estimates = np.empty(len(indices))
    for slot, index in enumerate(indices):
        original = flat[index]
        flat[index] = original + epsilon
        upper = float(function(shifted))
        flat[index] = original - epsilon
        lower = float(function(shifted))
        flat[index] = original
        if not (math.isfinite(upper) and math.isfinite(lower)):
            raise NumericException(f"Non-finite function value at coordinate {index}")
        estimates[slot] = (upper - lower) / (2.0 * epsilon)
    if coordinates is None:
        return estimates.reshape(point.shape)
    return estimates


def wls_solve_elimination(X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """
    Weighted ridge by Gaussian elimination with partial pivoting.

    Same normal equations as the Cholesky path: column 0 is an unpenalized
    intercept.

    Raises:
        SingularMatrixException: If a pivot falls below 1e-14 in magnitude.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,) or w.shape != (n,):
        raise InvalidArgumentException("Design, responses and weights have inconsistent shapes")

    system = np.zeros((p, p + 1))
    for row in range(p):
        for col in range(p):
            system[row, col] = np.sum(w * X[:, row] * X[:, col])
        system[row, p] = np.sum(w * X[:, row] * y)
        if row > 0:
            system[row, row] += ridge_lambda

    for col in range(p):
        pivot_row = col + int(np.argmax(np.abs(system[col:, col])))
        if abs(system[pivot_row, col]) < PIVOT_TOLERANCE:
            raise SingularMatrixException(f"Pivot {system[pivot_row, col]:.3e} in column {col}")
        if pivot_row != col:
            system[[col, pivot_row]] = system[[pivot_row, col]]
        for row in range(col + 1, p):
            factor = system[row, col] / system[col, col]
            system[row, col:] -= factor * system[col, col:]

    beta = np.zeros(p)
    for row in range(p - 1, -1, -1):
        beta[row] = (system[row, p] - system[row, row + 1:p] @ beta[row + 1:]) / system[row, row]
    return beta
