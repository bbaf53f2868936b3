import hashlib

import numpy as np
import pytest
from scipy import stats

from .sampling import (
    FRACTION_BITS,
    fiat_shamir_uniform,
    sample_fraction,
    sample_fractions,
    sample_work,
    work_cdf,
)


@pytest.mark.parametrize("delta", [0.5, 0.01, 1e-4])
def test_fractions_follow_cdf(delta: float):
    rng = np.random.default_rng(1234)
    fractions = sample_fractions(delta, rng.random(10**6))
    assert fractions.min() >= 0
    assert fractions.max() < 1 - delta + 1e-12
    result = stats.kstest(fractions, lambda x: work_cdf(x, delta))
    assert result.statistic < 0.005


def test_fractions_match_scalar():
    us = np.linspace(0, 0.999, 50)
    expected = [sample_fraction(0.02, u) for u in us]
    assert np.allclose(sample_fractions(0.02, us), expected)


def test_cdf_endpoints():
    assert work_cdf(0.0, 0.1) == 0
    assert abs(work_cdf(0.9, 0.1) - 1) < 1e-12


def test_later_work_sampled_more_often():
    rng = np.random.default_rng(0)
    fractions = sample_fractions(0.001, rng.random(10**5))
    early = np.mean(fractions < 0.1)
    late = np.mean((fractions >= 0.8) & (fractions < 0.9))
    assert late > 5 * early


def test_sample_work_bounds():
    w = (1 << 200) + 12345
    assert sample_work(w, 0.01, 0.0) == 0
    rng = np.random.default_rng(5)
    prev = -1
    for u in np.sort(rng.random(200)):
        x = sample_work(w, 0.01, float(u))
        assert 0 <= x < w
        assert 100 * x <= 99 * w + 100 * (w >> (FRACTION_BITS - 1))
        assert x >= prev
        prev = x


def test_sample_work_exact_for_small_totals():
    for w in [1, 2, 7, 1000]:
        for u in [0.0, 0.25, 0.5, 0.999999]:
            assert 0 <= sample_work(w, 0.3, u) < w


def test_fiat_shamir_uniform():
    seed = bytes(range(32))
    draws = [fiat_shamir_uniform(seed, i) for i in range(100)]
    assert all(0 <= u < 1 for u in draws)
    assert len(set(draws)) == 100
    assert draws == [fiat_shamir_uniform(seed, i) for i in range(100)]
    assert draws[7] == slow_fiat_shamir(seed, 7)
    assert fiat_shamir_uniform(bytes(32), 0) != fiat_shamir_uniform(bytes(31) + b"\x01", 0)


def slow_fiat_shamir(seed: bytes, i: int) -> float:
    digest = hashlib.sha256(seed + i.to_bytes(8, "big")).digest()
    return int(digest.hex(), 16) / 2**256


def test_sample_work_follows_cdf():
    w_total = (1 << 230) + 987654321
    delta = 0.01
    rng = np.random.default_rng(99)
    fractions = [sample_work(w_total, delta, float(u)) / w_total for u in rng.random(10**6)]
    result = stats.kstest(fractions, lambda x: work_cdf(x, delta))
    assert result.statistic < 0.005
