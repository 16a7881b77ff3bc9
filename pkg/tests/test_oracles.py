"""Tests for the brute-force reference implementations."""

import numpy as np
import pytest

from xaidesk.core.exceptions import BudgetException, NumericException, SingularMatrixException
from xaidesk.schemas.oracle import OracleBudget
from xaidesk.services.lime_service import fit_weighted_ridge
from xaidesk.services.oracle_service import finite_diff, permutation_shapley, wls_solve_elimination
from xaidesk.services.verification_service import run_verification, verify_shapley, verify_wls


def test_permutation_single_player():
    """Test that the only player receives v(full) - v(empty)."""
    phi = permutation_shapley(lambda mask: 0.25 + 0.5 * mask[0], 1)
    np.testing.assert_allclose(phi, [0.5])


def test_permutation_additive_game():
    """Test that every ordering returns additive weights."""
    weights = np.array([0.3, -0.1, 0.7, 0.05])
    np.testing.assert_allclose(permutation_shapley(lambda m: float(m @ weights), 4), weights, atol=1e-12)


def test_permutation_budget():
    """Test that K = 11 exceeds the default enumeration budget."""
    with pytest.raises(BudgetException):
        permutation_shapley(lambda m: 0.0, 11)
    with pytest.raises(BudgetException):
        permutation_shapley(lambda m: 0.0, 4, OracleBudget(max_coalition_bits=3))


def test_finite_diff_linear():
    """Test central differences of 3x."""
    point = np.array([[1.0, -2.0], [0.5, 4.0]])
    np.testing.assert_allclose(finite_diff(lambda x: 3.0 * x.sum(), point), np.full((2, 2), 3.0), atol=1e-8)


def test_finite_diff_quadratic_and_coordinates():
    """Test that x^2 gives 2x at requested flat indices and the point is untouched."""
    point = np.array([1.0, -3.0, 2.5])
    before = point.copy()
    estimates = finite_diff(lambda x: float(np.sum(x ** 2)), point, coordinates=[0, 2])
    np.testing.assert_allclose(estimates, [2.0, 5.0], atol=1e-8)
    np.testing.assert_array_equal(point, before)


def test_finite_diff_non_finite():
    """Test that an infinite evaluation raises a numeric error."""
    with pytest.raises(NumericException):
        finite_diff(lambda x: float("inf") if x[0] < 0 else float(x[0]), np.array([0.0]))


def test_finite_diff_budget():
    """Test the coordinate budget."""
    with pytest.raises(BudgetException):
        finite_diff(lambda x: 0.0, np.zeros(10), budget=OracleBudget(max_fd_coordinates=5))


def test_elimination_diagonal_system():
    """Test an orthogonal design with unit weights."""
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    beta = wls_solve_elimination(X, np.array([2.0, 5.0]), np.ones(2), 0.0)
    np.testing.assert_allclose(beta, [2.0, 3.0], atol=1e-12)


def test_elimination_matches_cholesky():
    """Test agreement with the primary ridge solver on a random weighted system."""
    rng = np.random.default_rng(5)
    X = np.column_stack([np.ones(80), rng.integers(0, 2, size=(80, 7))])
    y, w = rng.uniform(size=80), rng.uniform(0.1, 1.0, 80)
    np.testing.assert_allclose(wls_solve_elimination(X, y, w, 0.01), fit_weighted_ridge(X, y, w, 0.01), atol=1e-10)


def test_elimination_ridge_limit():
    """Test that a huge ridge leaves only the weighted mean intercept."""
    rng = np.random.default_rng(6)
    X = np.column_stack([np.ones(30), rng.integers(0, 2, size=(30, 3))])
    y = rng.uniform(size=30)
    beta = wls_solve_elimination(X, y, np.ones(30), 1e10)
    assert np.abs(beta[1:]).max() < 1e-6
    assert beta[0] == pytest.approx(y.mean(), abs=1e-6)


def test_elimination_singular():
    """Test that a duplicated column without ridge is singular."""
    X = np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    with pytest.raises(SingularMatrixException):
        wls_solve_elimination(X, np.ones(3), np.ones(3), 0.0)


def test_wls_suite_passes():
    """Test the weighted ridge agreement suite."""
    result = verify_wls()
    assert result.passed
    assert result.cases == 20


def test_shapley_suite_passes():
    """Test a short run of the Shapley agreement suite."""
    result = verify_shapley(games=3)
    assert result.passed
    assert result.max_error <= 1e-9


def test_unknown_suite():
    """Test that an unknown suite name is refused."""
    from xaidesk.core.exceptions import InvalidArgumentException

    with pytest.raises(InvalidArgumentException):
        run_verification("bogus")
