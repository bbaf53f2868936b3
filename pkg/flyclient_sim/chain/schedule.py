import math
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np

from ..util import bits_to_target, target_to_bits

# The Zcash mainnet proof-of-work limit.
DEFAULT_BITS = 0x1F07FFFF


class DifficultySchedule(ABC):
    """
    A rule producing each block's compact target and deciding whether a
    declared target is an acceptable successor of the previous one.
    """

    name = "abstract"

    def __init__(self, base_bits: int = DEFAULT_BITS):
        self.base_bits = base_bits
        self.base_target = bits_to_target(base_bits)

    @abstractmethod
    def next_bits(
        self, prev_bits: int, height: int, rng: Optional[np.random.Generator]
    ) -> int:
        """
        Choose the bits of the block at height, given its parent's bits.
        """

    @abstractmethod
    def is_valid(self, prev_bits: int, bits: int, height: int) -> bool:
        """
        Check the bits of the block at height against its parent's bits.
        """


class FixedSchedule(DifficultySchedule):
    name = "fixed"

    def next_bits(
        self, prev_bits: int, height: int, rng: Optional[np.random.Generator]
    ) -> int:
        return self.base_bits

    def is_valid(self, prev_bits: int, bits: int, height: int) -> bool:
        return bits == self.base_bits


class LinearGrowthSchedule(DifficultySchedule):
    """
    Difficulty growing linearly with height: d(h) = d(0) * (1 + rate * h).
    """

    name = "linear-growth"

    def __init__(self, base_bits: int = DEFAULT_BITS, rate: float = 1e-5):
        super().__init__(base_bits)
        self.rate = rate

    def bits_at(self, height: int) -> int:
        target = int(self.base_target / (1.0 + self.rate * height))
        if target < 1:
            raise ValueError(f"target underflow at height {height}")
        return target_to_bits(target)

    def next_bits(
        self, prev_bits: int, height: int, rng: Optional[np.random.Generator]
    ) -> int:
        return self.bits_at(height)

    def is_valid(self, prev_bits: int, bits: int, height: int) -> bool:
        return bits == self.bits_at(height)


class RandomWalkSchedule(DifficultySchedule):
    """
    A log-normal random walk of the target whose per-step ratio is clamped
    to [1/tau, tau], and whose overall drift from the base target is kept
    within a factor of max_drift.

    Validation cannot replay the walk, so it only checks the ratio bound.
    """

    name = "random-walk"

    def __init__(
        self,
        base_bits: int = DEFAULT_BITS,
        sigma: float = 0.05,
        tau: float = 4.0,
        max_drift: float = 16.0,
    ):
        super().__init__(base_bits)
        assert tau > 1, "tau must exceed 1"
        self.sigma = sigma
        self.tau = tau
        self.max_drift = max_drift

    def next_bits(
        self, prev_bits: int, height: int, rng: Optional[np.random.Generator]
    ) -> int:
        assert rng is not None, "random-walk schedule needs an rng"
        # Compact rounding must not push the ratio past tau.
        limit = math.log(self.tau) * 0.99
        step = float(np.clip(rng.normal(0.0, self.sigma), -limit, limit))
        target = bits_to_target(prev_bits) * math.exp(step)
        low = self.base_target / self.max_drift
        high = self.base_target * self.max_drift
        return target_to_bits(int(min(max(target, low), high)))

    def is_valid(self, prev_bits: int, bits: int, height: int) -> bool:
        return ratio_within(bits_to_target(prev_bits), bits_to_target(bits), self.tau)


def ratio_within(a: int, b: int, tau: float) -> bool:
    """
    Check that a/b lies in [1/tau, tau], without leaving integer math.
    """
    if a <= 0 or b <= 0:
        return False
    return a * 1000 <= b * round(tau * 1000) and b * 1000 <= a * round(tau * 1000)


def make_schedule(
    name: str,
    base_bits: int = DEFAULT_BITS,
    rate: float = 1e-5,
    sigma: float = 0.05,
    tau: float = 4.0,
    max_drift: float = 16.0,
) -> DifficultySchedule:
    """
    Create a difficulty schedule from a human-readable name.
    """
    if name == "fixed":
        return FixedSchedule(base_bits)
    elif name == "linear-growth":
        return LinearGrowthSchedule(base_bits, rate=rate)
    elif name == "random-walk":
        return RandomWalkSchedule(base_bits, sigma=sigma, tau=tau, max_drift=max_drift)
    else:
        raise ValueError(f"unknown schedule: {name}")


def median_time(headers: Sequence) -> int:
    times = sorted(h.time for h in headers)
    return times[len(times) // 2]
