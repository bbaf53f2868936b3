"""
Summary statistics for benchmark repetitions.
"""

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats


class MeanCI(NamedTuple):
    mean: float
    low: float
    high: float
    count: int

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2


def mean_confidence_interval(values: Sequence[float], confidence: float = 0.95) -> MeanCI:
    """
    Compute a mean and its Student-t confidence interval.

    A single value gets a zero-width interval.
    """
    arr = np.asarray(values, dtype=np.float64)
    assert len(arr), "cannot summarize zero values"
    mean = float(np.mean(arr))
    if len(arr) == 1:
        return MeanCI(mean, mean, mean, 1)
    sem = float(np.std(arr, ddof=1)) / math.sqrt(len(arr))
    half = float(stats.t.ppf((1 + confidence) / 2, len(arr) - 1)) * sem
    return MeanCI(mean, mean - half, mean + half, len(arr))


class LogFit(NamedTuple):
    a: float
    b: float
    r_squared: float

    def __call__(self, n: float) -> float:
        return self.a + self.b * math.log(n)


def log_fit(ns: Sequence[float], values: Sequence[float]) -> LogFit:
    """
    Fit values ~ a + b ln(n) by least squares.
    """
    xs = np.log(np.asarray(ns, dtype=np.float64))
    ys = np.asarray(values, dtype=np.float64)
    assert len(xs) == len(ys) and len(xs) >= 2, "need at least two points"
    b, a = np.polyfit(xs, ys, 1)
    residual = float(np.sum((ys - (a + b * xs)) ** 2))
    total = float(np.sum((ys - np.mean(ys)) ** 2))
    r_squared = 1.0 if total == 0 else 1 - residual / total
    return LogFit(float(a), float(b), r_squared)


def acceptance_bound(lam: float, trials: int) -> float:
    """
    The largest acceptance rate consistent with a 2^-lam soundness error,
    allowing three standard deviations of sampling noise over trials.
    """
    p = 2.0**-lam
    return p + 3 * math.sqrt(p * (1 - p) / trials)
