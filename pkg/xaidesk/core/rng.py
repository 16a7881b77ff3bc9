"""SplitMix64, the single random stream used for weights, data, masks and permutations.

Draw order is part of the contract: every consumer documents the order in which
it pulls values, so datasets, weights and explanations are reproducible from
the seed alone.
"""

from typing import List, MutableSequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

T = TypeVar("T")


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Stateful SplitMix64 generator with vectorized bulk draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def next_u64_array(self, n: int) -> np.ndarray:
        """
        Draw n values at once; identical to n calls of next_u64.

        Args:
            n: Number of values.

        Returns:
            np.ndarray: uint64 array of length n.
        """
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def float_array(self, n: int) -> np.ndarray:
        return (self.next_u64_array(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def uniform_array(self, n: int, low: float, high: float) -> np.ndarray:
        return low + (high - low) * self.float_array(n)

    def next_below(self, bound: int) -> int:
        """Integer in [0, bound) by multiply-shift of one 64-bit draw."""
        return (self.next_u64() * bound) >> 64

    def integer(self, low: int, high: int) -> int:
        """Integer in the closed range [low, high]."""
        return low + self.next_below(high - low + 1)

    def shuffle(self, items: MutableSequence[T]) -> None:
        """Fisher–Yates in place, walking i from the end down to 1."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> List[int]:
        order = list(range(n))
        self.shuffle(order)
        return order
