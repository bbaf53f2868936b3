"""
The work distribution of probabilistic samples and its Fiat-Shamir
randomness.

A sample falls at chain-work fraction x_hat in [0, 1 - delta) with density
proportional to 1 / (1 - x_hat), so later blocks are sampled more often.
Its CDF is F(x_hat) = ln(1 - x_hat) / ln(delta), which inverts to
x_hat = 1 - delta^u for uniform u.
"""

from typing import Union

import numpy as np

from ..util import sha256

# Work values are scaled by a fraction with this many bits, which keeps
# 256-bit work exact without losing float precision.
FRACTION_BITS = 53


def sample_fraction(delta: float, u: float) -> float:
    assert 0 < delta < 1, "delta must lie in (0, 1)"
    return 1.0 - delta**u


def sample_fractions(delta: float, us: np.ndarray) -> np.ndarray:
    assert 0 < delta < 1, "delta must lie in (0, 1)"
    return 1.0 - np.power(delta, us)


def sample_work(w_total: int, delta: float, u: float) -> int:
    """
    Map a uniform u in [0, 1) to a work value in [0, (1 - delta) w_total).
    """
    frac = int(sample_fraction(delta, u) * (1 << FRACTION_BITS))
    return (w_total * frac) >> FRACTION_BITS


def work_cdf(x_hat: Union[float, np.ndarray], delta: float) -> Union[float, np.ndarray]:
    return np.log1p(-np.asarray(x_hat)) / np.log(delta)


def fiat_shamir_uniform(seed: bytes, i: int) -> float:
    """
    Derive the i-th uniform draw of a non-interactive proof from its seed,
    as int(SHA-256(seed || i as u64 BE)) / 2^256.
    """
    digest = sha256(seed + i.to_bytes(8, "big"))
    return int.from_bytes(digest, "big") / (1 << 256)
