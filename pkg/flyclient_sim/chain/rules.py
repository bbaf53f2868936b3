import bisect
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from ..mmr import NodeFormat, make_node_format
from ..util import ZERO_HASH, sha256
from .header import AnyHeader, Header, PowEngine, make_pow_engine
from .schedule import DEFAULT_BITS, DifficultySchedule, make_schedule, median_time


@dataclass
class ConsensusRules:
    """
    Everything a verifier must agree on with the miners: the PoW engine,
    the difficulty schedule, the network-upgrade heights and the MMR node
    format.

    Chains whose engine is ethash-stub follow the distilled consensus, in
    which headers commit to the chain history root directly and MMR nodes
    use the distilled layout.
    """

    engine: str = "equihash-stub"
    difficulty_scale: int = 1024
    schedule: str = "fixed"
    base_bits: int = DEFAULT_BITS
    growth_rate: float = 1e-5
    sigma: float = 0.05
    tau: float = 4.0
    max_drift: float = 16.0
    node_format: str = "zcash"
    upgrades: Tuple[int, ...] = field(default_factory=tuple)
    block_spacing: int = 75
    max_future_drift: int = 7200
    median_window: int = 11
    genesis_time: int = 1477641360

    def __post_init__(self):
        self.upgrades = tuple(int(x) for x in self.upgrades)
        if any(x <= 0 for x in self.upgrades):
            raise ValueError("upgrade heights must be positive")
        if any(a >= b for a, b in zip(self.upgrades, self.upgrades[1:])):
            raise ValueError(f"upgrade heights must be strictly ascending: {self.upgrades}")
        if (self.engine == "ethash-stub") != (self.node_format == "distilled"):
            raise ValueError(
                "the distilled node format goes with the ethash-stub engine, and only with it"
            )

    @property
    def consensus(self) -> str:
        return "distilled" if self.engine == "ethash-stub" else "zcash"

    @cached_property
    def pow_engine(self) -> PowEngine:
        return make_pow_engine(self.engine, self.difficulty_scale)

    @cached_property
    def difficulty_schedule(self) -> DifficultySchedule:
        return make_schedule(
            self.schedule,
            base_bits=self.base_bits,
            rate=self.growth_rate,
            sigma=self.sigma,
            tau=self.tau,
            max_drift=self.max_drift,
        )

    @cached_property
    def mmr_format(self) -> NodeFormat:
        return make_node_format(self.node_format)

    @cached_property
    def genesis_header(self) -> Header:
        """
        The well-known first header, fixed by the rules alone.
        """
        header = Header(
            prev_hash=ZERO_HASH,
            merkle_root=ZERO_HASH,
            block_commitments=ZERO_HASH,
            time=self.genesis_time,
            bits=self.base_bits,
            nonce=ZERO_HASH,
            solution=self.pow_engine.random_solution(np.random.default_rng(0)),
            height=0,
        )
        return self.pow_engine.mine(header)

    @property
    def genesis_digest(self) -> bytes:
        return self.pow_engine.digest(self.genesis_header)

    def history_commitment(self, history_root: bytes, auth_root: bytes) -> bytes:
        """
        Compute the value a header stores to commit to its chain history.
        """
        if self.consensus == "distilled":
            return history_root
        return sha256(history_root + auth_root + ZERO_HASH)

    def branch_starts(self) -> List[int]:
        return [0] + list(self.upgrades)

    def branch_of(self, height: int) -> int:
        return bisect.bisect_right(self.upgrades, height)

    def branch_start(self, branch_id: int) -> int:
        return self.branch_starts()[branch_id]

    def committed_range(self, height: int) -> Tuple[int, int, int]:
        """
        Find the MMR a header at height commits to.

        :return: a tuple (branch_id, start_height, leaf_count). A header
                 commits to the headers from start_height to height - 1.
        """
        assert height > 0, "genesis commits to nothing"
        branch_id = self.branch_of(height - 1)
        start = self.branch_start(branch_id)
        return branch_id, start, height - start

    def to_json(self) -> dict:
        res = asdict(self)
        res["upgrades"] = list(self.upgrades)
        return res

    @classmethod
    def from_json(cls, obj: dict) -> "ConsensusRules":
        return cls(**obj)


def validate_transition(
    prev_headers: Sequence[AnyHeader], candidate: AnyHeader, rules: ConsensusRules
) -> bool:
    """
    Check a header's difficulty and timestamp against the headers before it.

    :param prev_headers: consecutive headers ending at the candidate's
                         parent; only the last median_window are used.
    """
    if not prev_headers:
        return candidate.height == 0
    prev = prev_headers[-1]
    if not rules.difficulty_schedule.is_valid(prev.bits, candidate.bits, candidate.height):
        return False
    window = prev_headers[-rules.median_window :]
    return median_time(window) < candidate.time < prev.time + rules.max_future_drift
