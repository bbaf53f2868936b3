"""
The FlyClient verifier: one VerificationSession checks one prover, and
flyclient_verify picks the heaviest prover that survives its session.
"""

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from ..chain import AnyHeader, ConsensusRules, Header, ratio_within, validate_transition
from ..logger import Logger
from ..mmr import (
    AncestryProof,
    LeafMeta,
    MmrNode,
    ProofStructureError,
    cover,
    prefix_work,
    reconstruct_root,
)
from ..params import VerifierParams
from ..prover import BlockchainInfo
from ..util import ZERO_HASH, bits_to_target, work_from_bits
from .handles import ProverError, ProverHandle, TransportError
from .sampling import fiat_shamir_uniform, sample_fraction, sample_work
from .transcript import Transcript

VARIANTS = ("reference", "fixed-difficulty", "cache-less")
PROOF_STYLES = ("per-sample", "cumulative")
FORMATS = ("normal", "distilled")

FLAG_CUMULATIVE = 1
FLAG_DISTILLED = 2
FLAG_FIXED = 4


@dataclass(frozen=True)
class VerifierOptions:
    """
    How a verifier samples and what it downloads.

    The fixed-difficulty variant maps draws to heights directly and derives
    the total work from the block count instead of querying work. The cache-less variant
    re-downloads MMR nodes for every sample. Distilled proofs batch all
    samples of a branch into one cumulative proof over distilled headers.
    """

    variant: str = "reference"
    proof_style: str = "per-sample"
    format: str = "normal"
    non_interactive: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown verifier variant: {self.variant}")
        if self.proof_style not in PROOF_STYLES:
            raise ValueError(f"unknown proof style: {self.proof_style}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown header format: {self.format}")
        if self.variant == "cache-less" and self.non_interactive:
            raise ValueError("the cache-less variant has no non-interactive form")
        if self.format == "distilled" and self.proof_style != "cumulative":
            raise ValueError("distilled proofs use the cumulative proof style")

    @property
    def caching(self) -> bool:
        return self.variant != "cache-less"

    @property
    def fixed(self) -> bool:
        return self.variant == "fixed-difficulty"

    @property
    def distilled(self) -> bool:
        return self.format == "distilled"

    @property
    def flags(self) -> int:
        return (
            (FLAG_CUMULATIVE if self.proof_style == "cumulative" else 0)
            | (FLAG_DISTILLED if self.distilled else 0)
            | (FLAG_FIXED if self.fixed else 0)
        )

    @classmethod
    def from_flags(cls, flags: int, non_interactive: bool = True) -> "VerifierOptions":
        if flags & ~(FLAG_CUMULATIVE | FLAG_DISTILLED | FLAG_FIXED):
            raise ValueError(f"unknown option flags: {flags:#x}")
        return cls(
            variant="fixed-difficulty" if flags & FLAG_FIXED else "reference",
            proof_style="cumulative" if flags & FLAG_CUMULATIVE else "per-sample",
            format="distilled" if flags & FLAG_DISTILLED else "normal",
            non_interactive=non_interactive,
        )


@dataclass
class Verdict:
    accepted: bool
    reason: str = "ok"
    height: Optional[int] = None
    index: Optional[int] = None
    transport: bool = False


class Rejection(Exception):
    """
    Raised inside a session when the prover's answers fail a check.
    """

    def __init__(self, reason: str, height: Optional[int] = None, index: Optional[int] = None):
        super().__init__(reason)
        self.reason = reason
        self.height = height
        self.index = index

    def verdict(self) -> Verdict:
        return Verdict(accepted=False, reason=self.reason, height=self.height, index=self.index)


class Draw(NamedTuple):
    u: float
    x: Optional[int]
    height: int


class VerificationSession:
    """
    The state a verifier keeps while checking one prover.

    Headers are cached by height and, unless the variant is cache-less,
    MMR nodes by (branch_id, index), both downloaded and recomputed ones.
    cumwork holds the total work up to each header whose position has been
    established, and proven holds the heights known to be ancestors of the
    tip.
    """

    def __init__(
        self,
        rules: ConsensusRules,
        params: VerifierParams,
        options: Optional[VerifierOptions] = None,
        rng: Optional[np.random.Generator] = None,
        logger: Optional[Logger] = None,
    ):
        self.rules = rules
        self.params = params
        self.options = options or VerifierOptions()
        if self.options.fixed and rules.schedule != "fixed":
            raise ValueError("the fixed-difficulty variant needs a fixed difficulty schedule")
        if self.options.distilled and rules.consensus != "distilled":
            raise ValueError("distilled proofs need a chain with distilled consensus")
        self.rng = rng if rng is not None else np.random.default_rng()
        self.logger = logger
        self.engine = rules.pow_engine

        self.headers: Dict[int, AnyHeader] = {}
        self.nodes: Dict[Tuple[int, int], MmrNode] = {}
        self.auth_roots: Dict[int, bytes] = {}
        self.cumwork: Dict[int, int] = {}
        self.proven: Set[int] = set()
        self.transcript = Transcript()
        self.draws: List[Draw] = []
        self.seed: Optional[bytes] = None
        self.tip_height: Optional[int] = None

    def note(self, message: str):
        if self.logger is not None:
            self.logger.note(message)

    def fetch_header(self, p: ProverHandle, height: int) -> AnyHeader:
        if height in self.headers:
            return self.headers[height]
        header = p.get_block_header(height, self.options.distilled)
        if header.height != height:
            header = replace(header, height=height)
        self.transcript.add("header", header, key=height)
        self._check_pow(header, height)
        self.headers[height] = header
        return header

    def fetch_node(self, p: ProverHandle, branch_id: int, index: int) -> MmrNode:
        key = (branch_id, index)
        if self.options.caching and key in self.nodes:
            return self.nodes[key]
        node = p.get_history_node(branch_id, index)
        self.transcript.add("node", node, key=index, branch=branch_id)
        if self.options.caching:
            self.nodes[key] = node
        return node

    def fetch_auth_root(self, p: ProverHandle, height: int) -> bytes:
        if height not in self.auth_roots:
            res = p.get_auth_data_root(height)
            self.transcript.add("auth_root", res, key=height)
            self.auth_roots[height] = res
        return self.auth_roots[height]

    def next_uniform(self, i: int) -> float:
        if self.options.non_interactive:
            return fiat_shamir_uniform(self.seed, i)
        return float(self.rng.random())

    def run(self, p: ProverHandle, info: BlockchainInfo):
        """
        Check a prover's declared chain, raising Rejection on failure.
        """
        n, w = info.block_count, info.total_work
        self.transcript.add("info", info, key=n)
        if n < 1:
            raise Rejection("empty chain")
        tip_h = n - 1
        tip = info.tip_header
        if self.options.distilled and isinstance(tip, Header):
            tip = self.engine.distill(tip)
        self._check_pow(tip, tip_h)
        self.headers[tip_h] = tip
        self.proven.add(tip_h)
        self.tip_height = tip_h
        self.seed = self.engine.digest(tip)
        genesis = tip if tip_h == 0 else self.fetch_header(p, 0)
        if self.engine.digest(genesis) != self.rules.genesis_digest:
            raise Rejection("genesis differs from the well-known genesis", height=0)
        if self.options.fixed:
            if w != n * work_from_bits(self.rules.base_bits):
                raise Rejection("declared total work does not match the fixed difficulty")
        else:
            if w <= 0:
                raise Rejection("declared total work must be positive")
            self.cumwork[tip_h] = w

        anchor = n - self.params.n_det - 1
        degenerate = anchor <= 0
        anchor = max(anchor, 0)
        self._check_window(p, anchor, tip_h)
        pending = []
        if self.options.distilled:
            pending = [h for h in range(anchor, tip_h) if h not in self.proven]

        if degenerate:
            genesis = self.headers[0]
            if genesis.prev_hash is not None and genesis.prev_hash != ZERO_HASH:
                raise Rejection("genesis header has a parent", height=0)
            if not self.options.fixed and self.cumwork[0] != work_from_bits(genesis.bits):
                raise Rejection("declared total work does not match the headers", height=0)
        else:
            self._draw_samples(p, n, w, anchor, tip_h)

        if self.options.proof_style == "cumulative":
            self._cumulative_proofs(p, tip_h, pending)
        else:
            for d in self.draws:
                self.sample_at_height(p, d.height, tip_h, [] if d.x is None else [d.x])

    def _check_pow(self, header: AnyHeader, height: int):
        if not self.engine.check(header):
            raise Rejection("invalid proof of work", height=height)
        if self.options.fixed and header.bits != self.rules.base_bits:
            raise Rejection("header difficulty differs from the fixed target", height=height)

    def _check_window(self, p: ProverHandle, anchor: int, tip_h: int):
        for h in range(anchor, tip_h):
            self.fetch_header(p, h)
        linked = not self.options.distilled
        for h in range(anchor + 1, tip_h + 1):
            header = self.headers[h]
            if linked and header.prev_hash != self.engine.digest(self.headers[h - 1]):
                raise Rejection("header does not link to its parent", height=h)
            if not self.options.fixed:
                start = max(anchor, h - self.rules.median_window)
                window = [self.headers[k] for k in range(start, h)]
                if not validate_transition(window, header, self.rules):
                    raise Rejection("invalid difficulty transition", height=h)
        if linked:
            self.proven.update(range(anchor, tip_h))
        if not self.options.fixed:
            for h in range(tip_h - 1, anchor - 1, -1):
                self.cumwork[h] = self.cumwork[h + 1] - work_from_bits(self.headers[h + 1].bits)
                if self.cumwork[h] <= 0:
                    raise Rejection("declared total work does not cover the window", height=h)

    def _draw_samples(self, p: ProverHandle, n: int, w: int, anchor: int, tip_h: int):
        if self.options.fixed:
            delta = 1 - anchor / n
        else:
            w_det = p.get_total_work(anchor)
            self.transcript.add("work", w_det, key=anchor)
            if w_det != self.cumwork[anchor]:
                raise Rejection(
                    "total work before the window disagrees with the window", height=anchor
                )
            delta = 1 - w_det / w
        if not 0 < delta < 1:
            raise Rejection("declared total work is inconsistent with the window")

        for i in range(self.params.n_prob):
            u = self.next_uniform(i)
            if self.options.fixed:
                h = min(int(sample_fraction(delta, u) * n), anchor)
                self.draws.append(Draw(u=u, x=None, height=h))
                continue
            x = min(sample_work(w, delta, u), w_det - 1)
            h = p.get_height_with_total_work(x)
            self.transcript.add("height", h, key=x)
            if not 0 <= h < tip_h:
                raise Rejection("sampled height out of range", height=h)
            self.draws.append(Draw(u=u, x=x, height=h))

    def sample_at_height(
        self, p: ProverHandle, height: int, local_tip: int, xs: Sequence[int] = ()
    ):
        """
        Prove that height is an ancestor of local_tip, first proving the
        start of local_tip's branch when height lies in an earlier one.
        """
        assert 0 <= height < local_tip, "sampled height must precede the local tip"
        if height in self.proven:
            self._check_sampled_work(height, xs)
            return
        _, start, _ = self.rules.committed_range(local_tip)
        if height < start:
            self.sample_at_height(p, start, local_tip)
            self.sample_at_height(p, height, start, xs)
            return
        self._prove(p, local_tip, {height: list(xs)})

    def _cumulative_proofs(self, p: ProverHandle, tip_h: int, pending: Iterable[int]):
        wanted: Dict[int, List[int]] = defaultdict(list)
        for d in self.draws:
            wanted[d.height].extend([] if d.x is None else [d.x])
        for h in pending:
            wanted.setdefault(h, [])

        remaining = {}
        for h, xs in wanted.items():
            if h in self.proven:
                self._check_sampled_work(h, xs)
            else:
                remaining[h] = xs

        local_tip = tip_h
        while remaining:
            _, start, _ = self.rules.committed_range(local_tip)
            targets = {h: xs for h, xs in remaining.items() if h >= start}
            if any(h < start for h in remaining) and start not in self.proven:
                targets.setdefault(start, [])
            if targets:
                self._prove(p, local_tip, targets)
            remaining = {h: xs for h, xs in remaining.items() if h < start}
            local_tip = start

    def _prove(self, p: ProverHandle, local_tip: int, targets: Dict[int, List[int]]):
        branch_id, start, leaf_count = self.rules.committed_range(local_tip)
        heights = sorted(targets)
        headers = {h: self.fetch_header(p, h) for h in heights}
        spans = cover(leaf_count, [h - start for h in heights])
        nodes = [self.fetch_node(p, branch_id, s.index) for s in spans]
        for span, node in zip(spans, nodes):
            if (node.earliest_height, node.latest_height) != (
                start + span.first_leaf,
                start + span.end_leaf - 1,
            ):
                raise Rejection(
                    "proof node covers the wrong heights", height=local_tip, index=span.index
                )
        if not self.options.fixed:
            self._check_plausibility(start, spans, nodes, headers)

        leaves = [
            (h - start, self.engine.digest(x), LeafMeta(time=x.time, bits=x.bits, height=h))
            for h, x in headers.items()
        ]
        proof = AncestryProof([s.index for s in spans], nodes)
        try:
            root, computed = reconstruct_root(
                leaves, proof, leaf_count, self.rules.mmr_format, branch_id
            )
        except ProofStructureError as exc:
            self.note(f"malformed proof against height {local_tip}: {exc}")
            raise Rejection(f"malformed ancestry proof: {exc}", height=local_tip)

        auth = ZERO_HASH
        if self.rules.consensus != "distilled":
            auth = self.fetch_auth_root(p, local_tip)
        expected = self.headers[local_tip].commitment_field
        if self.rules.history_commitment(root.commitment, auth) != expected:
            raise Rejection("history commitment mismatch", height=local_tip)
        if self.options.caching:
            for index, node in computed.items():
                self.nodes.setdefault((branch_id, index), node)

        if not self.options.fixed:
            self._bind_work(local_tip, start, spans, nodes, root, headers, targets)
        self.proven.update(heights)

    def _check_plausibility(self, start: int, spans, nodes, headers: Dict[int, AnyHeader]):
        items = sorted(
            [(s.first_leaf, n.earliest_bits, n.latest_bits) for s, n in zip(spans, nodes)]
            + [(h - start, x.bits, x.bits) for h, x in headers.items()]
        )
        for (_, _, late), (pos, early, _) in zip(items, items[1:]):
            if not ratio_within(bits_to_target(late), bits_to_target(early), self.rules.tau):
                raise Rejection("implausible difficulty change in proof", height=start + pos)

    def _bind_work(
        self,
        local_tip: int,
        start: int,
        spans,
        nodes: List[MmrNode],
        root: MmrNode,
        headers: Dict[int, AnyHeader],
        targets: Dict[int, List[int]],
    ):
        base = self.cumwork[local_tip] - work_from_bits(self.headers[local_tip].bits) - root.work
        if base < 0 or (start == 0 and base != 0):
            raise Rejection("declared total work does not match the proof", height=local_tip)
        prefix = prefix_work(
            [(s.first_leaf, n.work) for s, n in zip(spans, nodes)]
            + [(h - start, work_from_bits(x.bits)) for h, x in headers.items()]
        )
        for h, xs in targets.items():
            total = base + prefix[h - start]
            if self.cumwork.setdefault(h, total) != total:
                raise Rejection("proof disagrees with the window's total work", height=h)
            self._check_sampled_work(h, xs)

    def _check_sampled_work(self, height: int, xs: Sequence[int]):
        if self.options.fixed:
            return
        total = self.cumwork[height]
        before = total - work_from_bits(self.headers[height].bits)
        for x in xs:
            if x > total or (height > 0 and x <= before):
                raise Rejection("sampled height does not hold the sampled work", height=height)


def check_prover(p: ProverHandle, info: BlockchainInfo, session: VerificationSession) -> Verdict:
    """
    Run a session against a prover, turning failures into a verdict.

    Transport failures are flagged separately, since they say nothing
    about the prover's chain.
    """
    try:
        session.run(p, info)
    except Rejection as exc:
        verdict = exc.verdict()
    except TransportError as exc:
        verdict = Verdict(accepted=False, reason=f"transport error: {exc}", transport=True)
    except ProverError as exc:
        verdict = Verdict(accepted=False, reason=str(exc))
    else:
        verdict = Verdict(accepted=True)
    if not verdict.accepted:
        where = "" if verdict.height is None else f" at height {verdict.height}"
        session.note(f"{p.name} rejected{where}: {verdict.reason}")
    return verdict


@dataclass
class VerifyResult:
    prover: Optional[ProverHandle] = None
    info: Optional[BlockchainInfo] = None
    verdicts: List[Tuple[str, Verdict]] = field(default_factory=list)
    sessions: List[VerificationSession] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.prover is not None

    @property
    def transport_only(self) -> bool:
        """
        Check whether every prover failed at the transport level.
        """
        return bool(self.verdicts) and all(v.transport for _, v in self.verdicts)


def flyclient_verify(
    provers: Sequence[ProverHandle],
    rules: ConsensusRules,
    params: VerifierParams,
    options: Optional[VerifierOptions] = None,
    rng: Optional[np.random.Generator] = None,
    logger: Optional[Logger] = None,
) -> VerifyResult:
    """
    Check provers from the most to the least declared work, accepting the
    first one whose chain verifies.

    A session only accepts a declared total work it has bound to the
    headers it checked, so an inflated claim costs the prover its turn.
    """
    res = VerifyResult()
    declared = []
    for p in provers:
        try:
            declared.append((p, p.get_blockchain_info()))
        except (TransportError, ProverError) as exc:
            transport = isinstance(exc, TransportError)
            if logger is not None:
                logger.note(f"{p.name} skipped: {exc}")
            verdict = Verdict(accepted=False, reason=str(exc), transport=transport)
            res.verdicts.append((p.name, verdict))
    declared.sort(key=lambda x: x[1].total_work, reverse=True)
    for p, info in declared:
        session = VerificationSession(rules, params, options, rng=rng, logger=logger)
        verdict = check_prover(p, info, session)
        res.sessions.append(session)
        res.verdicts.append((p.name, verdict))
        if verdict.accepted:
            res.prover = p
            res.info = info
            break
    return res
