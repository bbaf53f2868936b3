import bisect
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional

from ..mmr import LeafMeta, Mmr
from ..util import ZERO_HASH, work_from_bits
from .header import Header
from .rules import ConsensusRules


class ChainError(ValueError):
    """
    Raised when a chain cannot be built, loaded or validated. The height
    attribute names the offending block, if any.
    """

    def __init__(self, message: str, height: Optional[int] = None):
        if height is not None:
            message = f"height {height}: {message}"
        super().__init__(message)
        self.height = height


@dataclass
class ChainBranch:
    """
    The headers of one consensus branch and the MMR over them.

    The MMR of the last branch does not include the tip, since no header
    commits to it yet.
    """

    branch_id: int
    start_height: int
    headers: List[Header] = field(default_factory=list)
    mmr: Optional[Mmr] = None

    @property
    def end_height(self) -> int:
        return self.start_height + len(self.headers)


@dataclass
class Chain:
    rules: ConsensusRules
    branches: List[ChainBranch]
    auth_roots: List[bytes]
    seed: int = 0
    kind: str = "honest"
    fork_info: Optional[Dict[str, Any]] = None

    @cached_property
    def headers(self) -> List[Header]:
        return [h for branch in self.branches for h in branch.headers]

    @property
    def block_count(self) -> int:
        return len(self.headers)

    @property
    def tip_height(self) -> int:
        return self.block_count - 1

    @property
    def tip(self) -> Header:
        return self.headers[-1]

    @cached_property
    def block_hashes(self) -> List[bytes]:
        engine = self.rules.pow_engine
        return [engine.digest(h) for h in self.headers]

    @cached_property
    def cumulative_work(self) -> List[int]:
        return list(itertools.accumulate(work_from_bits(h.bits) for h in self.headers))

    def header(self, height: int) -> Header:
        self._check_height(height)
        return self.headers[height]

    def block_hash(self, height: int) -> bytes:
        self._check_height(height)
        return self.block_hashes[height]

    def auth_root(self, height: int) -> bytes:
        self._check_height(height)
        return self.auth_roots[height]

    def work(self, height: int) -> int:
        return work_from_bits(self.header(height).bits)

    def total_work(self, height: Optional[int] = None) -> int:
        """
        Sum the work of every block from genesis up to height, inclusive.
        """
        if height is None:
            height = self.tip_height
        self._check_height(height)
        return self.cumulative_work[height]

    def height_with_total_work(self, work: int) -> int:
        """
        Find the lowest height whose total work is at least work.
        """
        if work < 0 or work > self.total_work():
            raise ChainError(f"no block reaches total work {work:#x}")
        return bisect.bisect_left(self.cumulative_work, work)

    def leaf_meta(self, height: int) -> LeafMeta:
        header = self.header(height)
        return LeafMeta(time=header.time, bits=header.bits, height=height)

    def branch_of(self, height: int) -> ChainBranch:
        self._check_height(height)
        return self.branches[self.rules.branch_of(height)]

    def history_root(self, height: int) -> bytes:
        """
        Get the root of the MMR the header at height commits to, or the
        zero hash for genesis.
        """
        self._check_height(height)
        if height == 0:
            return ZERO_HASH
        branch_id, _, leaf_count = self.rules.committed_range(height)
        return self.branches[branch_id].mmr.root(leaf_count)

    def _check_height(self, height: int):
        if not 0 <= height < self.block_count:
            raise ChainError(f"no block at height {height}", height)
