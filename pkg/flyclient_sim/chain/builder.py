import math
from typing import List, Optional

import numpy as np
from tqdm.auto import tqdm

from ..mmr import LeafMeta, Mmr, node_count
from ..util import ZERO_HASH, round_half_up, work_from_bits
from .chain import Chain, ChainBranch, ChainError
from .header import Header
from .rules import ConsensusRules

# Nominal spacing is perturbed by at most this many seconds either way.
TIME_JITTER = 30


class ChainBuilder:
    """
    Mine headers one at a time, keeping every branch MMR up to date.

    Before header h is mined, header h - 1 is appended to the MMR of its
    branch, so each header commits to all earlier headers of the branch
    that was active at its parent.
    """

    def __init__(self, rules: ConsensusRules, rng: np.random.Generator):
        self.rules = rules
        self.rng = rng
        self.engine = rules.pow_engine
        self.schedule = rules.difficulty_schedule
        self.headers: List[Header] = []
        self.auth_roots: List[bytes] = []
        self.block_hashes: List[bytes] = []
        self.mmrs: List[Mmr] = []

    def add_genesis(self):
        assert not self.headers, "genesis must come first"
        self._push(self.rules.genesis_header, ZERO_HASH)

    def next_bits(self, prev_bits: int, height: Optional[int] = None) -> int:
        if height is None:
            height = len(self.headers)
        try:
            return self.schedule.next_bits(prev_bits, height, self.rng)
        except (ValueError, AssertionError) as exc:
            raise ChainError(f"unsatisfiable difficulty schedule: {exc}", height)

    def add_block(self, bits: Optional[int] = None, valid: bool = True):
        height = len(self.headers)
        assert height > 0, "use add_genesis for the first block"
        prev = self.headers[-1]
        self._append_leaf(height - 1)

        branch_id, _, leaf_count = self.rules.committed_range(height)
        root = self.mmrs[branch_id].root(leaf_count)
        auth_root = self.rng.bytes(32)
        if bits is None:
            bits = self.next_bits(prev.bits)
        jitter = int(self.rng.integers(-TIME_JITTER, TIME_JITTER + 1))
        header = Header(
            prev_hash=self.block_hashes[-1],
            merkle_root=self.rng.bytes(32),
            block_commitments=self.rules.history_commitment(root, auth_root),
            time=self.rules.genesis_time + self.rules.block_spacing * height + jitter,
            bits=bits,
            nonce=ZERO_HASH,
            solution=self.engine.random_solution(self.rng),
            height=height,
        )
        self._push(self.engine.mine(header, valid=valid), auth_root)

    def finish(self, seed: int, **kwargs) -> Chain:
        starts = self.rules.branch_starts()
        branches = []
        for branch_id, mmr in enumerate(self.mmrs):
            start = starts[branch_id]
            end = starts[branch_id + 1] if branch_id + 1 < len(starts) else None
            branches.append(
                ChainBranch(
                    branch_id=branch_id,
                    start_height=start,
                    headers=self.headers[start:end],
                    mmr=mmr,
                )
            )
        return Chain(
            rules=self.rules,
            branches=branches,
            auth_roots=list(self.auth_roots),
            seed=seed,
            **kwargs,
        )

    def _push(self, header: Header, auth_root: bytes):
        height = len(self.headers)
        if self.rules.branch_of(height) == len(self.mmrs):
            self.mmrs.append(
                Mmr(
                    self.rules.mmr_format,
                    branch_id=len(self.mmrs),
                    start_height=height,
                )
            )
        self.headers.append(header)
        self.auth_roots.append(auth_root)
        self.block_hashes.append(self.engine.digest(header))

    def _append_leaf(self, height: int):
        header = self.headers[height]
        mmr = self.mmrs[self.rules.branch_of(height)]
        meta = LeafMeta(time=header.time, bits=header.bits, height=height)
        mmr.append_leaf(self.block_hashes[height], meta)

    @classmethod
    def from_prefix(
        cls, chain: Chain, fork_height: int, rng: np.random.Generator
    ) -> "ChainBuilder":
        """
        Start a builder holding a copy of the chain up to and including
        fork_height, with every MMR in the state it had right after that
        header was mined.
        """
        res = cls(chain.rules, rng)
        res.headers = chain.headers[: fork_height + 1]
        res.auth_roots = chain.auth_roots[: fork_height + 1]
        res.block_hashes = chain.block_hashes[: fork_height + 1]
        for branch in chain.branches:
            if branch.start_height > fork_height:
                break
            leaf_count = min(branch.end_height, fork_height) - branch.start_height
            res.mmrs.append(
                Mmr.from_nodes(
                    chain.rules.mmr_format,
                    branch.mmr.nodes[: node_count(leaf_count)],
                    branch_id=branch.branch_id,
                    start_height=branch.start_height,
                    leaf_count=leaf_count,
                )
            )
        return res


def build_honest_chain(
    n: int, rules: ConsensusRules, seed: int, progress: bool = False
) -> Chain:
    """
    Mine a chain of n blocks, genesis included.

    The result depends only on n, the rules and the seed.
    """
    if n < 1:
        raise ChainError("a chain needs at least the genesis block")
    if rules.upgrades and rules.upgrades[-1] >= n:
        raise ChainError(f"upgrade heights {rules.upgrades} must lie below {n}")
    builder = ChainBuilder(rules, np.random.default_rng(seed))
    builder.add_genesis()
    heights = range(1, n)
    if progress:
        heights = tqdm(heights, desc="mining", unit="block")
    for _ in heights:
        builder.add_block()
    return builder.finish(seed)


def build_adversarial_fork(
    chain: Chain,
    fork_height: int,
    work_budget: int,
    validity_ratio: float,
    seed: int,
    length: Optional[int] = None,
    progress: bool = False,
) -> Chain:
    """
    Build a fork of chain branching after fork_height, in which the blocks
    with valid proof of work carry at most work_budget total work.

    The valid blocks form a suffix of the fork, and the remaining blocks are
    mined to fail their PoW check. Every block declares its work honestly
    through its bits, so the fork's declared total work exceeds the work
    actually spent whenever it contains invalid blocks.

    :param length: the number of new blocks. By default, enough blocks for
                   the validity ratio to hold, or (with a zero validity
                   ratio) enough to outgrow the honest chain.
    """
    if not 0 <= fork_height < chain.tip_height:
        raise ChainError(f"fork height must lie below the tip {chain.tip_height}")
    if not 0 <= validity_ratio <= 1:
        raise ValueError(f"validity ratio out of range: {validity_ratio}")
    if work_budget < 0:
        raise ValueError("negative work budget")
    if work_budget == 0 and validity_ratio > 0:
        raise ChainError("a zero work budget admits no valid blocks")

    rng = np.random.default_rng(seed)
    builder = ChainBuilder.from_prefix(chain, fork_height, rng)

    if validity_ratio == 0:
        num_blocks = length or chain.tip_height - fork_height + 1
    else:
        block_work = work_from_bits(chain.header(fork_height).bits)
        num_valid = work_budget // block_work
        num_blocks = length or math.ceil(num_valid / validity_ratio)
    if num_blocks <= 0:
        raise ChainError("the work budget does not cover a single block")

    all_bits = []
    prev_bits = chain.header(fork_height).bits
    for i in range(num_blocks):
        prev_bits = builder.next_bits(prev_bits, fork_height + 1 + i)
        all_bits.append(prev_bits)

    valid = _valid_suffix(all_bits, work_budget, validity_ratio)
    blocks = zip(all_bits, valid)
    if progress:
        blocks = tqdm(blocks, total=num_blocks, desc="forging", unit="block")
    for bits, ok in blocks:
        builder.add_block(bits=bits, valid=ok)

    valid_work = sum(work_from_bits(b) for b, ok in zip(all_bits, valid) if ok)
    assert valid_work <= work_budget, "fork exceeds its work budget"
    return builder.finish(
        seed,
        kind="fork",
        fork_info=dict(
            parent_seed=chain.seed,
            fork_height=fork_height,
            work_budget=work_budget,
            validity_ratio=validity_ratio,
            valid_blocks=sum(valid),
            invalid_blocks=num_blocks - sum(valid),
            valid_work=valid_work,
        ),
    )


def _valid_suffix(all_bits: List[int], work_budget: int, validity_ratio: float) -> List[bool]:
    """
    Mark the longest suffix of blocks whose work fits the budget as valid,
    keeping the valid count near validity_ratio times the fork length.
    """
    res = [False] * len(all_bits)
    if validity_ratio == 0:
        return res
    max_valid = max(1, round_half_up(validity_ratio * len(all_bits)))
    total = 0
    for i in reversed(range(len(all_bits))):
        work = work_from_bits(all_bits[i])
        if total + work > work_budget or len(all_bits) - i > max_valid:
            break
        total += work
        res[i] = True
    return res
