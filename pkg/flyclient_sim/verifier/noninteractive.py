"""
Non-interactive proofs: the answers a verifier with Fiat-Shamir randomness
would ask for, bundled so that anyone can replay the verification offline.

Binary body layout, integers big-endian:

    block_count  u64
    total_work   u256
    n_det        u32
    n_prob       u32
    flags        u8     bit 0 cumulative, bit 1 distilled, bit 2 fixed-difficulty
    tip          u16 length | header
    headers      u32 count, then height u64 | u16 length | header
    nodes        u32 count, then branch u32 | index u64 | u16 length | node
    auth roots   u32 count, then height u64 | root (32 bytes)
    total works  u32 count, then height u64 | work u256
    heights      u32 count, then work u256 | height u64

Every table is sorted by key, so a proof has exactly one encoding.
"""

import struct
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from ..chain import AnyHeader, ConsensusRules, DistilledHeader, Header
from ..codec import DecodeError
from ..logger import Logger
from ..mmr import MmrNode
from ..params import VerifierParams
from ..prover import BlockchainInfo
from .handles import MissingItemError, ProverHandle, RecordingProver
from .session import (
    FLAG_DISTILLED,
    Verdict,
    VerificationSession,
    VerifierOptions,
    check_prover,
)
from .transcript import TranscriptItem


@dataclass
class NiProof:
    block_count: int
    total_work: int
    n_det: int
    n_prob: int
    flags: int
    tip: AnyHeader
    headers: Dict[int, AnyHeader] = field(default_factory=dict)
    nodes: Dict[Tuple[int, int], MmrNode] = field(default_factory=dict)
    auth_roots: Dict[int, bytes] = field(default_factory=dict)
    total_works: Dict[int, int] = field(default_factory=dict)
    heights: Dict[int, int] = field(default_factory=dict)

    @property
    def distilled(self) -> bool:
        return bool(self.flags & FLAG_DISTILLED)

    def info(self) -> BlockchainInfo:
        return BlockchainInfo(
            block_count=self.block_count, total_work=self.total_work, tip_header=self.tip
        )

    def items(self) -> List[TranscriptItem]:
        """
        List the bundle's contents as transcript items in encoding order,
        for size accounting.
        """
        res = [TranscriptItem("info", None, self.block_count, self.info())]
        res += [TranscriptItem("header", None, h, x) for h, x in sorted(self.headers.items())]
        res += [TranscriptItem("node", b, i, x) for (b, i), x in sorted(self.nodes.items())]
        res += [TranscriptItem("auth_root", None, h, x) for h, x in sorted(self.auth_roots.items())]
        res += [TranscriptItem("work", None, h, x) for h, x in sorted(self.total_works.items())]
        res += [TranscriptItem("height", None, x, h) for x, h in sorted(self.heights.items())]
        return res

    def to_bytes(self, rules: ConsensusRules) -> bytes:
        fmt = rules.mmr_format
        parts = [
            struct.pack(">Q", self.block_count),
            self.total_work.to_bytes(32, "big"),
            struct.pack(">IIB", self.n_det, self.n_prob, self.flags),
            _sized(self.tip.serialize()),
            struct.pack(">I", len(self.headers)),
        ]
        for h, header in sorted(self.headers.items()):
            parts += [struct.pack(">Q", h), _sized(header.serialize())]
        parts.append(struct.pack(">I", len(self.nodes)))
        for (branch_id, index), node in sorted(self.nodes.items()):
            parts += [struct.pack(">IQ", branch_id, index), _sized(fmt.serialize(node))]
        parts.append(struct.pack(">I", len(self.auth_roots)))
        for h, root in sorted(self.auth_roots.items()):
            parts += [struct.pack(">Q", h), root]
        parts.append(struct.pack(">I", len(self.total_works)))
        for h, work in sorted(self.total_works.items()):
            parts += [struct.pack(">Q", h), work.to_bytes(32, "big")]
        parts.append(struct.pack(">I", len(self.heights)))
        for x, h in sorted(self.heights.items()):
            parts += [x.to_bytes(32, "big"), struct.pack(">Q", h)]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, rules: ConsensusRules) -> "NiProof":
        reader = _Reader(data)
        try:
            block_count = reader.unpack(">Q")
            total_work = reader.u256()
            n_det, n_prob, flags = reader.unpack(">IIB")
            parse = DistilledHeader.parse if flags & FLAG_DISTILLED else Header.parse
            tip = parse(reader.sized(), block_count - 1)
            headers = {}
            for _ in range(reader.unpack(">I")):
                h = reader.unpack(">Q")
                headers[h] = parse(reader.sized(), h)
            nodes = {}
            for _ in range(reader.unpack(">I")):
                key = reader.unpack(">IQ")
                nodes[key] = rules.mmr_format.parse(reader.sized())
            auth_roots = {}
            for _ in range(reader.unpack(">I")):
                h = reader.unpack(">Q")
                auth_roots[h] = reader.take(32)
            total_works = {}
            for _ in range(reader.unpack(">I")):
                h = reader.unpack(">Q")
                total_works[h] = reader.u256()
            heights = {}
            for _ in range(reader.unpack(">I")):
                x = reader.u256()
                heights[x] = reader.unpack(">Q")
        except (ValueError, struct.error) as exc:
            raise DecodeError(f"malformed proof: {exc}")
        if reader.offset != len(data):
            raise DecodeError(f"{len(data) - reader.offset} trailing bytes after proof")
        return cls(
            block_count=block_count,
            total_work=total_work,
            n_det=n_det,
            n_prob=n_prob,
            flags=flags,
            tip=tip,
            headers=headers,
            nodes=nodes,
            auth_roots=auth_roots,
            total_works=total_works,
            heights=heights,
        )

    def to_json(self) -> dict:
        return dict(
            blocks=self.block_count,
            totalwork=f"{self.total_work:064x}",
            ndet=self.n_det,
            nprob=self.n_prob,
            flags=self.flags,
            tip=self.tip.to_json(),
            headers=[x.to_json() for _, x in sorted(self.headers.items())],
            nodes=[
                dict(branch=b, index=i, node=x.to_json())
                for (b, i), x in sorted(self.nodes.items())
            ],
            authroots={str(h): x.hex() for h, x in sorted(self.auth_roots.items())},
            totalworks={str(h): f"{x:064x}" for h, x in sorted(self.total_works.items())},
            heights={f"{x:x}": h for x, h in sorted(self.heights.items())},
        )

    @classmethod
    def from_json(cls, obj: dict) -> "NiProof":
        try:
            flags = int(obj["flags"])
            header_cls = DistilledHeader if flags & FLAG_DISTILLED else Header
            headers = [header_cls.from_json(x) for x in obj["headers"]]
            return cls(
                block_count=int(obj["blocks"]),
                total_work=int(obj["totalwork"], 16),
                n_det=int(obj["ndet"]),
                n_prob=int(obj["nprob"]),
                flags=flags,
                tip=header_cls.from_json(obj["tip"]),
                headers={x.height: x for x in headers},
                nodes={
                    (int(x["branch"]), int(x["index"])): MmrNode.from_json(x["node"])
                    for x in obj["nodes"]
                },
                auth_roots={int(h): bytes.fromhex(x) for h, x in obj["authroots"].items()},
                total_works={int(h): int(x, 16) for h, x in obj["totalworks"].items()},
                heights={int(x, 16): int(h) for x, h in obj["heights"].items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"malformed proof: {exc}")


def _sized(data: bytes) -> bytes:
    return struct.pack(">H", len(data)) + data


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise ValueError("truncated proof")
        res = self.data[self.offset : self.offset + size]
        self.offset += size
        return res

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values

    def u256(self) -> int:
        return int.from_bytes(self.take(32), "big")

    def sized(self) -> bytes:
        return self.take(self.unpack(">H"))


class BundleProver(ProverHandle):
    """
    Answer queries from a non-interactive proof, failing on anything the
    proof does not contain.
    """

    name = "bundle"

    def __init__(self, proof: NiProof):
        self.proof = proof

    def get_blockchain_info(self) -> BlockchainInfo:
        return self.proof.info()

    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        if height == self.proof.block_count - 1:
            return self.proof.tip
        return self._lookup(self.proof.headers, height, "header")

    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        return self._lookup(self.proof.nodes, (branch_id, index), "node")

    def get_auth_data_root(self, height: int) -> bytes:
        return self._lookup(self.proof.auth_roots, height, "auth data root")

    def get_total_work(self, height: int) -> int:
        return self._lookup(self.proof.total_works, height, "total work")

    def get_height_with_total_work(self, work: int) -> int:
        return self._lookup(self.proof.heights, work, "height for work")

    @staticmethod
    def _lookup(table: dict, key, what: str):
        if key not in table:
            raise MissingItemError(f"proof lacks {what} {key}")
        return table[key]


def _ni_options(options: Optional[VerifierOptions]) -> VerifierOptions:
    return replace(options or VerifierOptions(), non_interactive=True)


def ni_prove(
    prover: ProverHandle,
    rules: ConsensusRules,
    params: VerifierParams,
    options: Optional[VerifierOptions] = None,
) -> NiProof:
    """
    Build a non-interactive proof by running the Fiat-Shamir verifier
    against a prover and bundling every answer it received.

    A chain that fails verification still yields a bundle; it just won't
    verify.
    """
    if params.mode != "non-interactive":
        raise ValueError("non-interactive proofs need non-interactive sample counts")
    options = _ni_options(options)
    recorder = RecordingProver(prover)
    info = recorder.get_blockchain_info()
    session = VerificationSession(rules, params, options)
    check_prover(recorder, info, session)
    tip = info.tip_header
    if options.distilled and isinstance(tip, Header):
        tip = rules.pow_engine.distill(tip)
    return NiProof(
        block_count=info.block_count,
        total_work=info.total_work,
        n_det=params.n_det,
        n_prob=params.n_prob,
        flags=options.flags,
        tip=tip,
        headers=dict(recorder.headers),
        nodes=dict(recorder.nodes),
        auth_roots=dict(recorder.auth_roots),
        total_works=dict(recorder.total_works),
        heights=dict(recorder.heights),
    )


def ni_verify(
    proof: NiProof,
    rules: ConsensusRules,
    params: VerifierParams,
    options: Optional[VerifierOptions] = None,
    logger: Optional[Logger] = None,
) -> Verdict:
    """
    Replay the Fiat-Shamir verifier against a proof bundle.

    Without options, the proof's own flags choose the verifier variant;
    with them, a proof made under other flags is rejected.
    """
    if options is None:
        try:
            options = VerifierOptions.from_flags(proof.flags)
        except ValueError as exc:
            return Verdict(accepted=False, reason=str(exc))
    options = _ni_options(options)
    if proof.flags != options.flags:
        return Verdict(accepted=False, reason="proof was made with other verifier options")
    if (proof.n_det, proof.n_prob) != (params.n_det, params.n_prob):
        return Verdict(accepted=False, reason="proof was made for other sample counts")
    try:
        session = VerificationSession(rules, params, options, logger=logger)
    except ValueError as exc:
        return Verdict(accepted=False, reason=str(exc))
    return check_prover(BundleProver(proof), proof.info(), session)
