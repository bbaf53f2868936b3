import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from ..util import MAX_TARGET, bits_to_target, sha256


class FormatError(ValueError):
    """
    Raised when a header cannot be represented in the requested format.
    """


@dataclass(frozen=True)
class Header:
    """
    A block header in the Zcash wire layout.

    The height is carried alongside the header but is not part of its
    serialization, so it does not take part in equality.
    """

    prev_hash: bytes
    merkle_root: bytes
    block_commitments: bytes
    time: int
    bits: int
    nonce: bytes
    solution: bytes
    version: int = 4
    height: int = field(default=0, compare=False)

    PREFIX_SIZE = 108

    @property
    def commitment_field(self) -> bytes:
        return self.block_commitments

    def prefix_bytes(self) -> bytes:
        """
        Serialize every field before the nonce.
        """
        return b"".join(
            [
                self.version.to_bytes(4, "little"),
                self.prev_hash,
                self.merkle_root,
                self.block_commitments,
                self.time.to_bytes(4, "little"),
                self.bits.to_bytes(4, "little"),
            ]
        )

    def serialize(self) -> bytes:
        return b"".join(
            [
                self.prefix_bytes(),
                self.nonce,
                len(self.solution).to_bytes(3, "little"),
                self.solution,
            ]
        )

    @classmethod
    def parse(cls, data: bytes, height: int = 0) -> "Header":
        if len(data) < cls.PREFIX_SIZE + 35:
            raise ValueError(f"header too short: {len(data)} bytes")
        solution_size = int.from_bytes(data[140:143], "little")
        if len(data) != 143 + solution_size:
            raise ValueError(
                f"header length {len(data)} does not match solution size {solution_size}"
            )
        return cls(
            version=int.from_bytes(data[0:4], "little"),
            prev_hash=data[4:36],
            merkle_root=data[36:68],
            block_commitments=data[68:100],
            time=int.from_bytes(data[100:104], "little"),
            bits=int.from_bytes(data[104:108], "little"),
            nonce=data[108:140],
            solution=data[143:],
            height=height,
        )

    def to_json(self) -> dict:
        return dict(
            version=self.version,
            height=self.height,
            previousblockhash=self.prev_hash.hex(),
            merkleroot=self.merkle_root.hex(),
            blockcommitments=self.block_commitments.hex(),
            time=self.time,
            bits=f"{self.bits:08x}",
            nonce=self.nonce.hex(),
            solution=self.solution.hex(),
        )

    @classmethod
    def from_json(cls, obj: dict) -> "Header":
        return cls(
            version=int(obj["version"]),
            height=int(obj["height"]),
            prev_hash=bytes.fromhex(obj["previousblockhash"]),
            merkle_root=bytes.fromhex(obj["merkleroot"]),
            block_commitments=bytes.fromhex(obj["blockcommitments"]),
            time=int(obj["time"]),
            bits=int(obj["bits"], 16),
            nonce=bytes.fromhex(obj["nonce"]),
            solution=bytes.fromhex(obj["solution"]),
        )


@dataclass(frozen=True)
class DistilledHeader:
    """
    The fields of an ethash-stub header that a light client needs, with
    everything else folded into header_hash.

    The PoW digest is computed over exactly these fields, so the chain
    history root is bound by the proof of work. With prev_hash (SPV mode)
    the header is 136 bytes, otherwise 104.
    """

    header_hash: bytes
    mixhash: bytes
    chain_history_root: bytes
    bits: int
    time: int
    prev_hash: Optional[bytes] = None
    height: int = field(default=0, compare=False)

    @property
    def commitment_field(self) -> bytes:
        return self.chain_history_root

    def pow_digest(self) -> bytes:
        return distilled_pow_digest(
            self.header_hash, self.mixhash, self.chain_history_root, self.bits, self.time
        )

    def serialize(self) -> bytes:
        res = b"".join(
            [
                self.header_hash,
                self.mixhash,
                self.chain_history_root,
                self.bits.to_bytes(4, "little"),
                self.time.to_bytes(4, "little"),
            ]
        )
        if self.prev_hash is not None:
            res += self.prev_hash
        return res

    @classmethod
    def parse(cls, data: bytes, height: int = 0) -> "DistilledHeader":
        if len(data) not in (104, 136):
            raise ValueError(f"distilled header must be 104 or 136 bytes, got {len(data)}")
        return cls(
            header_hash=data[0:32],
            mixhash=data[32:64],
            chain_history_root=data[64:96],
            bits=int.from_bytes(data[96:100], "little"),
            time=int.from_bytes(data[100:104], "little"),
            prev_hash=data[104:136] if len(data) == 136 else None,
            height=height,
        )

    def to_json(self) -> dict:
        res = dict(
            height=self.height,
            headerhash=self.header_hash.hex(),
            mixhash=self.mixhash.hex(),
            chainhistoryroot=self.chain_history_root.hex(),
            bits=f"{self.bits:08x}",
            time=self.time,
        )
        if self.prev_hash is not None:
            res["previousblockhash"] = self.prev_hash.hex()
        return res

    @classmethod
    def from_json(cls, obj: dict) -> "DistilledHeader":
        prev = obj.get("previousblockhash")
        return cls(
            height=int(obj["height"]),
            header_hash=bytes.fromhex(obj["headerhash"]),
            mixhash=bytes.fromhex(obj["mixhash"]),
            chain_history_root=bytes.fromhex(obj["chainhistoryroot"]),
            bits=int(obj["bits"], 16),
            time=int(obj["time"]),
            prev_hash=None if prev is None else bytes.fromhex(prev),
        )


AnyHeader = Union[Header, DistilledHeader]


def distilled_pow_digest(
    header_hash: bytes, mixhash: bytes, root: bytes, bits: int, time: int
) -> bytes:
    return sha256(
        header_hash
        + mixhash
        + root
        + bits.to_bytes(4, "little")
        + time.to_bytes(4, "little")
    )


class PowEngine(ABC):
    """
    A mock proof-of-work scheme.

    Digests are compared against the header target multiplied by
    difficulty_scale, so mining takes a handful of attempts while the
    declared work stays that of the unscaled target.
    """

    kind = "abstract"
    solution_size = 0

    def __init__(self, difficulty_scale: int = 1):
        assert difficulty_scale >= 1, "difficulty scale must be at least 1"
        self.difficulty_scale = difficulty_scale

    @property
    def header_size(self) -> int:
        return 143 + self.solution_size

    def effective_target(self, bits: int) -> int:
        return min(bits_to_target(bits) * self.difficulty_scale, MAX_TARGET)

    @abstractmethod
    def nonce_digester(self, header: Header) -> Callable[[bytes], bytes]:
        """
        Get a function mapping a nonce to the digest the header would have
        with that nonce, reusing the hash state of the fixed prefix.
        """

    def digest(self, header: AnyHeader) -> bytes:
        if isinstance(header, DistilledHeader):
            raise FormatError(f"{self.kind} headers have no distilled form")
        return self.nonce_digester(header)(header.nonce)

    def check(self, header: AnyHeader) -> bool:
        return int.from_bytes(self.digest(header), "big") < self.effective_target(
            header.bits
        )

    def mine(self, header: Header, valid: bool = True) -> Header:
        """
        Search nonces until the header's PoW validity equals valid.

        Invalid headers are what a lying prover produces for blocks it did
        not spend work on.
        """
        digester = self.nonce_digester(header)
        target = self.effective_target(header.bits)
        if not valid and target == MAX_TARGET:
            raise ValueError(f"every nonce meets the target of bits {header.bits:#010x}")
        counter = 0
        while True:
            nonce = counter.to_bytes(32, "little")
            ok = int.from_bytes(digester(nonce), "big") < target
            if ok == valid:
                return replace(header, nonce=nonce)
            counter += 1

    def random_solution(self, rng: np.random.Generator) -> bytes:
        return rng.bytes(self.solution_size)

    def distill(self, header: Header, with_prev: bool = False) -> DistilledHeader:
        raise FormatError(f"{self.kind} headers have no distilled form")


class MockShaEngine(PowEngine):
    """
    Double SHA-256 over the serialized header, with an empty solution.
    """

    kind = "mock-sha"
    solution_size = 0

    def nonce_digester(self, header: Header) -> Callable[[bytes], bytes]:
        prefix = hashlib.sha256(header.prefix_bytes())
        suffix = len(header.solution).to_bytes(3, "little") + header.solution

        def fn(nonce: bytes) -> bytes:
            h = prefix.copy()
            h.update(nonce)
            h.update(suffix)
            return hashlib.sha256(h.digest()).digest()

        return fn


class EquihashStubEngine(MockShaEngine):
    """
    Double SHA-256 over a header carrying a 1344-byte pseudo-random
    solution, matching the size of an Equihash (200, 9) solution.
    """

    kind = "equihash-stub"
    solution_size = 1344

    # Solution bytes follow a geometric distribution (about 6.5 bits of
    # entropy per byte), so gzip shrinks headers by roughly as much as it
    # shrinks real Equihash headers.
    solution_skew = 0.03

    def random_solution(self, rng: np.random.Generator) -> bytes:
        values = rng.geometric(self.solution_skew, size=self.solution_size) - 1
        return np.minimum(values, 255).astype(np.uint8).tobytes()


class EthashStubEngine(PowEngine):
    """
    A two-stage digest in the style of Ethash: header_hash covers every
    field except the 32-byte mixhash, and the PoW digest covers header_hash,
    the mixhash, the chain history root, the target and the timestamp.
    """

    kind = "ethash-stub"
    solution_size = 32

    def nonce_digester(self, header: Header) -> Callable[[bytes], bytes]:
        prefix = hashlib.sha256(header.prefix_bytes())

        def fn(nonce: bytes) -> bytes:
            h = prefix.copy()
            h.update(nonce)
            return distilled_pow_digest(
                h.digest(), header.solution, header.block_commitments, header.bits, header.time
            )

        return fn

    def digest(self, header: AnyHeader) -> bytes:
        if isinstance(header, DistilledHeader):
            return header.pow_digest()
        return super().digest(header)

    def distill(self, header: Header, with_prev: bool = False) -> DistilledHeader:
        return DistilledHeader(
            header_hash=sha256(header.prefix_bytes() + header.nonce),
            mixhash=header.solution,
            chain_history_root=header.block_commitments,
            bits=header.bits,
            time=header.time,
            prev_hash=header.prev_hash if with_prev else None,
            height=header.height,
        )


def make_pow_engine(kind: str, difficulty_scale: int = 1) -> PowEngine:
    """
    Create a PoW engine from a human-readable name.
    """
    if kind == "mock-sha":
        return MockShaEngine(difficulty_scale)
    elif kind == "equihash-stub":
        return EquihashStubEngine(difficulty_scale)
    elif kind == "ethash-stub":
        return EthashStubEngine(difficulty_scale)
    else:
        raise ValueError(f"unknown PoW engine: {kind}")