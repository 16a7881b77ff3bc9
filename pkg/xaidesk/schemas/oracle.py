"""Oracle budgets and verification results."""

from typing import List, Literal

from pydantic import BaseModel, Field

from xaidesk.core.exceptions import BudgetException

MAX_PERMUTATION_BITS = 10


class OracleBudget(BaseModel):
    """Limits checked before a brute-force oracle starts."""

    max_coalition_bits: int = Field(MAX_PERMUTATION_BITS, ge=1, le=MAX_PERMUTATION_BITS)
    max_fd_coordinates: int = Field(100_000, ge=1)

    def check_bits(self, region_count: int) -> None:
        if region_count > self.max_coalition_bits:
            raise BudgetException(
                f"Permutation oracle needs K <= {self.max_coalition_bits}, got K={region_count}"
            )

    def check_coordinates(self, count: int) -> None:
        if count > self.max_fd_coordinates:
            raise BudgetException(
                f"Finite differences over {count} coordinates exceed the budget of {self.max_fd_coordinates}"
            )


class SuiteResult(BaseModel):
    """Outcome of one oracle agreement suite."""

    suite: Literal["shapley", "grad", "wls"]
    cases: int
    max_error: float
    tolerance: float
    passed: bool


class VerificationReport(BaseModel):
    results: List[SuiteResult] = []

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)
