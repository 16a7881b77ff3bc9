"""Oracle agreement suites behind the verify command."""

import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from xaidesk.core.autodiff import backward
from xaidesk.core.exceptions import InvalidArgumentException
from xaidesk.core.rng import SplitMix64
from xaidesk.models.network import Network, build_toycnn
from xaidesk.schemas.model import ArchitectureConfig
from xaidesk.schemas.oracle import SuiteResult, VerificationReport
from xaidesk.services.lime_service import fit_weighted_ridge
from xaidesk.services.oracle_service import finite_diff, permutation_shapley, wls_solve_elimination
from xaidesk.services.shap_service import exact_shapley

logger = logging.getLogger(__name__)

SUITES = ("shapley", "grad", "wls")
SHAPLEY_TOLERANCE = 1e-9
GRAD_TOLERANCE = 1e-6
WLS_TOLERANCE = 1e-8
FD_EPSILON = 1e-5


def random_game(region_count: int, seed: int) -> Callable[[np.ndarray], float]:
    """Game with an independent uniform value for every coalition."""
    table = SplitMix64(seed).float_array(1 << region_count)
    weights = 1 << np.arange(region_count)

    def value(mask: np.ndarray) -> float:
        return float(table[int(np.dot(mask.astype(np.int64), weights))])

    return value


def verify_shapley(games: int = 20, region_count: int = 8) -> SuiteResult:
    """Exact enumeration against the permutation oracle, plus efficiency."""
    worst = 0.0
    for seed in range(games):
        game = random_game(region_count, seed)
        exact = exact_shapley(game, region_count)
        oracle = permutation_shapley(game, region_count)
        full = game(np.ones(region_count, dtype=bool))
        empty = game(np.zeros(region_count, dtype=bool))
        gap = abs(exact.sum() - (full - empty))
        worst = max(worst, float(np.max(np.abs(exact - oracle))), gap)
    return SuiteResult(
        suite="shapley", cases=games, max_error=worst, tolerance=SHAPLEY_TOLERANCE,
        passed=worst <= SHAPLEY_TOLERANCE,
    )


def parameter_gradient_errors(
        network: Network,
        x: np.ndarray,
        class_index: int,
        coordinates: Sequence[tuple],
        epsilon: float = FD_EPSILON,
) -> List[float]:
    """
    Relative error of backprop against central differences per (tensor, flat index).

    Coordinates whose +-epsilon shifts change the activation pattern sit on
    a kink and are skipped.
    """
    _, _, tape = network.forward(x)
    analytic = backward(tape, class_index).parameters
    params = {name: value.copy() for name, value in network.parameters().items()}
    pattern = network.activation_pattern(x)
    errors = []
    for name, index in coordinates:
        base = params[name]

        def logit(values: np.ndarray, name=name) -> float:
            return float(network.with_parameters({**params, name: values}).predict(x)[1][class_index])

        def pattern_at(delta: float, name=name, index=index) -> bytes:
            shifted = base.copy()
            shifted.flat[index] += delta
            return network.with_parameters({**params, name: shifted}).activation_pattern(x)

        if pattern_at(epsilon) != pattern or pattern_at(-epsilon) != pattern:
            logger.debug(f"Skipping kink at {name}[{index}]")
            continue
        numeric = finite_diff(logit, base, epsilon, coordinates=[index])[0]
        exact = analytic[name].flat[index]
        errors.append(abs(exact - numeric) / max(1.0, abs(exact)))
    return errors


def verify_gradients(models: int = 10, coordinates_per_model: int = 50) -> SuiteResult:
    """Backprop against finite differences on reduced toy CNNs."""
    architecture = ArchitectureConfig.reduced()
    errors: List[float] = []
    for seed in range(models):
        network = build_toycnn(seed, architecture)
        rng = SplitMix64(1000 + seed)
        x = rng.float_array(3 * architecture.input_size ** 2).reshape(network.input_shape)
        shapes: Dict[str, tuple] = {name: value.shape for name, value in network.parameters().items()}
        names = [name for name in shapes if name.endswith(".weight")]
        picks = []
        for _ in range(coordinates_per_model):
            name = names[rng.next_below(len(names))]
            picks.append((name, rng.next_below(int(np.prod(shapes[name])))))
        errors.extend(parameter_gradient_errors(network, x, rng.next_below(architecture.classes), picks))
    worst = max(errors) if errors else 0.0
    return SuiteResult(
        suite="grad", cases=len(errors), max_error=worst, tolerance=GRAD_TOLERANCE,
        passed=bool(errors) and worst <= GRAD_TOLERANCE,
    )


def verify_wls(systems: int = 20, samples: int = 60, features: int = 6) -> SuiteResult:
    """Cholesky path against Gaussian elimination on random weighted systems."""
    worst = 0.0
    for seed in range(systems):
        rng = SplitMix64(seed)
        masks = rng.float_array(samples * features).reshape(samples, features) < 0.5
        X = np.column_stack([np.ones(samples), masks.astype(np.float64)])
        y = rng.float_array(samples)
        w = 0.1 + rng.float_array(samples)
        primary = fit_weighted_ridge(X, y, w, 1e-3)
        oracle = wls_solve_elimination(X, y, w, 1e-3)
        worst = max(worst, float(np.max(np.abs(primary - oracle) / np.maximum(1.0, np.abs(oracle)))))
    return SuiteResult(
        suite="wls", cases=systems, max_error=worst, tolerance=WLS_TOLERANCE,
        passed=worst <= WLS_TOLERANCE,
    )


def run_verification(suite: str = "all") -> VerificationReport:
    """
    Run one oracle suite or all of them.

    Returns:
        VerificationReport: Per-suite worst errors and pass flags.
    """
    if suite != "all" and suite not in SUITES:
        raise InvalidArgumentException(f"Unknown suite '{suite}'; choose from {', '.join(SUITES)} or all")
    selected = SUITES if suite == "all" else (suite,)
    runners = {"shapley": verify_shapley, "grad": verify_gradients, "wls": verify_wls}
    report = VerificationReport()
    for name in selected:
        result = runners[name]()
        logger.info(
            f"verify {name}: {result.cases} cases, max error {result.max_error:.3e} "
            f"(tolerance {result.tolerance:g}) {'PASS' if result.passed else 'FAIL'}"
        )
        report.results.append(result)
    return report
