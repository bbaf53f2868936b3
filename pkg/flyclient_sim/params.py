"""
Sampling-count arithmetic for FlyClient proofs, and the parametrization of
a verifier from an adversarial work budget.
"""

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .util import round_half_up

MODES = ("interactive", "non-interactive")
LN2 = math.log(2)


class ParamDomainError(ValueError):
    """
    Raised when parameters fall outside the domain of the count formulas.
    """


def _check_domain(c: float, L: float, delta: float):
    if not 0 < c < 1:
        raise ParamDomainError(f"validity ratio must lie in (0, 1), got {c}")
    if not 0 < delta < 1:
        raise ParamDomainError(f"delta must lie in (0, 1), got {delta}")
    if delta >= c:
        raise ParamDomainError(f"delta ({delta}) must be below c ({c})")
    if L < 1:
        raise ParamDomainError(f"fork length must be at least 1, got {L}")


def probabilistic_samples(
    c: float, lam: float, n: float, delta: float, mode: str = "interactive"
) -> float:
    """
    Evaluate the unrounded number of probabilistic samples.

    Each sample catches a fork of validity ratio c with probability
    1 - log_c(delta)^-1; the non-interactive numerator also pays for the
    prover's ability to grind over c*n candidate forks.
    """
    numerator = lam
    if mode == "non-interactive":
        numerator = lam + math.log(c * n) / LN2
    elif mode != "interactive":
        raise ValueError(f"unknown mode: {mode}")
    miss = 1 - math.log(c) / math.log(delta)
    return -numerator * LN2 / math.log(miss)


def interactive_counts(
    c: float, L: int, lam: float, n: int, delta: float
) -> Tuple[int, int]:
    """
    :return: a tuple (n_det, n_prob).
    """
    _check_domain(c, L, delta)
    return L, round_half_up(probabilistic_samples(c, lam, n, delta, "interactive"))


def noninteractive_counts(
    c: float, L: int, lam: float, n: int, delta: float
) -> Tuple[int, int]:
    """
    :return: a tuple (n_det, n_prob).
    """
    _check_domain(c, L, delta)
    return L, round_half_up(probabilistic_samples(c, lam, n, delta, "non-interactive"))


def counts(
    c: float, L: int, lam: float, n: int, delta: float, mode: str
) -> Tuple[int, int]:
    if mode == "interactive":
        return interactive_counts(c, L, lam, n, delta)
    elif mode == "non-interactive":
        return noninteractive_counts(c, L, lam, n, delta)
    raise ValueError(f"unknown mode: {mode}")


def total_samples(c: float, n_a: float, n: int, lam: float, mode: str) -> int:
    """
    Count every sample of a proof parametrized with validity ratio c for a
    block budget n_a, under fixed difficulty.
    """
    L = round_half_up(n_a / c)
    return sum(counts(c, L, lam, n, L / n, mode))


def interactive_residual(c, n_a: float, n: float, lam: float):
    """
    First-order condition of the interactive sample total in c, with
    delta = n_a / (c n). Accepts scalars or numpy arrays.
    """
    a = np.log(n_a / (c * n))
    q = 1 - np.log(c) / a
    return lam * c**2 * LN2 * (-np.log(c) / (a**2 * c) - 1 / (a * c)) - n_a * q * np.log(
        q
    ) ** 2


def noninteractive_residual(c, n_a: float, n: float, lam: float):
    """
    First-order condition of the non-interactive sample total in c.
    """
    a = np.log(n_a / (c * n))
    b = np.log(n_a / (c**2 * n))
    g = np.log(b / a)
    return (g * n_a + c) * g * a * b + c * np.log(n_a / n) * (lam * LN2 + np.log(c * n))


class OptimalC(NamedTuple):
    c: float
    L: int
    n_det: int
    n_prob: int
    total: int
    bracketed: bool
    residual: float


def optimal_c_interactive(
    n_a: float, n: int, lam: float, grid_size: int = 4000
) -> OptimalC:
    return _optimal_c(n_a, n, lam, "interactive", interactive_residual, grid_size)


def optimal_c_noninteractive(
    n_a: float, n: int, lam: float, grid_size: int = 4000
) -> OptimalC:
    return _optimal_c(n_a, n, lam, "non-interactive", noninteractive_residual, grid_size)


def _optimal_c(
    n_a: float,
    n: int,
    lam: float,
    mode: str,
    residual: Callable,
    grid_size: int,
) -> OptimalC:
    """
    Find the validity ratio minimizing the sample total for a block budget.

    Every sign change of the residual on a geometric grid over the valid
    range of c is refined by bisection, and the root with the lowest
    continuous total wins. Without any sign change, the best point of a
    grid over the rounded totals is used instead.
    """
    if not 1 <= n_a < n:
        raise ParamDomainError(f"block budget must lie in [1, {n}), got {n_a}")

    def continuous_total(c: float) -> float:
        return n_a / c + probabilistic_samples(c, lam, n, n_a / (c * n), mode)

    low = math.sqrt(n_a / n)
    grid = np.geomspace(low, 1.0, grid_size)[1:-1]
    with np.errstate(all="ignore"):
        values = residual(grid, n_a, n, lam)
    finite = np.isfinite(values)
    signs = np.sign(values)
    changes = np.nonzero(finite[:-1] & finite[1:] & (signs[:-1] * signs[1:] < 0))[0]

    roots = []
    for i in changes:
        root = optimize.bisect(
            residual, grid[i], grid[i + 1], args=(n_a, n, lam), xtol=1e-14
        )
        roots.append(float(root))

    if roots:
        c = min(roots, key=continuous_total)
        bracketed = True
    else:
        candidates = [x / 100 for x in range(1, 100) if x / 100 > low]
        c = min(candidates, key=lambda x: _safe_total(x, n_a, n, lam, mode))
        bracketed = False

    L = round_half_up(n_a / c)
    n_det, n_prob = counts(c, L, lam, n, L / n, mode)
    return OptimalC(
        c=c,
        L=L,
        n_det=n_det,
        n_prob=n_prob,
        total=n_det + n_prob,
        bracketed=bracketed,
        residual=float(residual(c, n_a, n, lam)),
    )


def _safe_total(c: float, n_a: float, n: int, lam: float, mode: str) -> float:
    try:
        return total_samples(c, n_a, n, lam, mode)
    except ParamDomainError:
        return math.inf


def reduce_wa_to_cl(
    w_a: float, difficulties: Union[float, Sequence[float]], c: float
) -> int:
    """
    Convert a work budget into the fork length L of the equivalent
    (c, L)-adversary: the shortest chain suffix whose work reaches w_a / c.

    :param difficulties: either the average recent block work, or the work
                         of every block of the chain, oldest first.
    """
    if not 0 < c <= 1:
        raise ParamDomainError(f"validity ratio must lie in (0, 1], got {c}")
    needed = w_a / c
    if np.ndim(difficulties) == 0:
        return max(1, math.ceil(needed / float(difficulties)))
    tail = np.cumsum(np.asarray(difficulties, dtype=np.float64)[::-1])
    idx = int(np.searchsorted(tail, needed, side="left"))
    if idx == len(tail):
        raise ParamDomainError(
            f"adversary budget {needed:g} exceeds the chain's total work {tail[-1]:g}"
        )
    return idx + 1


@dataclass
class AdversaryBudget:
    """
    An adversary's work budget together with the market price of hash
    power, in the same work units as d_tilde.
    """

    w_a: float
    d_tilde: float
    c51_per_hour: float = 20_000.0
    honest_blocks_per_hour: float = 48.0

    @property
    def n_a(self) -> float:
        return self.w_a / self.d_tilde


def expected_budget(budget: AdversaryBudget) -> float:
    """
    Compute the cost of renting the hash power to mine the budget's blocks.
    """
    assert budget.d_tilde > 0 and budget.honest_blocks_per_hour > 0
    return budget.c51_per_hour * budget.w_a / (
        budget.d_tilde * budget.honest_blocks_per_hour
    )


@dataclass
class VerifierParams:
    c: float
    L: int
    lam: float
    n: int
    delta: float
    n_det: int
    n_prob: int
    mode: str = "interactive"
    difficulty_model: str = "fixed"

    def __post_init__(self):
        assert self.mode in MODES, f"unknown mode: {self.mode}"
        assert self.difficulty_model in ("fixed", "variable")
        assert self.n_det == self.L, "the deterministic window must span L blocks"
        assert self.n_prob >= 0
        assert 0 < self.delta < 1

    @property
    def total(self) -> int:
        return self.n_det + self.n_prob

    @classmethod
    def create(
        cls,
        c: float,
        L: int,
        lam: float,
        n: int,
        mode: str = "interactive",
        delta: Optional[float] = None,
    ) -> "VerifierParams":
        """
        Compute the sample counts for a (c, L) pair, using delta = L / n
        unless a work-based delta is supplied.
        """
        model = "fixed" if delta is None else "variable"
        if delta is None:
            delta = L / n
        n_det, n_prob = counts(c, L, lam, n, delta, mode)
        return cls(
            c=c,
            L=L,
            lam=lam,
            n=n,
            delta=delta,
            n_det=n_det,
            n_prob=n_prob,
            mode=mode,
            difficulty_model=model,
        )

    def to_json(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: Dict) -> "VerifierParams":
        return cls(**obj)


def parametrize_wa(
    w_a: float,
    block_work: Sequence[float],
    lam: float,
    mode: str = "interactive",
    window: int = 1000,
    variance_threshold: float = 0.01,
) -> VerifierParams:
    """
    Parametrize a verifier against a work-budget adversary.

    The block budget uses the average work of the last window blocks. When
    the work of the last L* blocks varies by at most variance_threshold
    (coefficient of variation), c* L* = n_a is used directly; otherwise L
    is recomputed from the actual tail work and delta becomes the work
    fraction of the deterministic suffix.

    :param block_work: the work of every block of the chain, oldest first.
    """
    works = np.asarray(block_work, dtype=np.float64)
    n = len(works)
    d_tilde = float(np.mean(works[-window:]))
    n_a = w_a / d_tilde
    if mode == "interactive":
        best = optimal_c_interactive(n_a, n, lam)
    else:
        best = optimal_c_noninteractive(n_a, n, lam)

    tail = works[-best.L :]
    spread = float(np.std(tail) / np.mean(tail))
    if spread <= variance_threshold:
        return VerifierParams.create(best.c, best.L, lam, n, mode)
    L = reduce_wa_to_cl(w_a, works, best.c)
    delta = float(np.sum(works[-L:]) / np.sum(works))
    return VerifierParams.create(best.c, L, lam, n, mode, delta=delta)


def header_savings(
    n_a: float,
    n: int,
    lam: float,
    baseline_c: float = 0.5,
    header_bytes: int = 1487,
) -> Dict[str, Dict[str, float]]:
    """
    Compare the header bytes of the optimal (c, L) pair against a baseline
    validity ratio, for both proof modes.
    """
    res = {}
    for mode, solver in [
        ("interactive", optimal_c_interactive),
        ("non-interactive", optimal_c_noninteractive),
    ]:
        base = total_samples(baseline_c, n_a, n, lam, mode)
        best = solver(n_a, n, lam)
        res[mode] = dict(
            baseline_total=base,
            optimal_total=best.total,
            baseline_bytes=base * header_bytes,
            optimal_bytes=best.total * header_bytes,
            saving=1 - best.total / base,
        )
    return res
