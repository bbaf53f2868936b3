"""
Encodings of headers, MMR nodes and proofs, byte accounting, and the cost
of posting a proof as calldata.

The non-interactive proof file layout is:

    magic        6 bytes  b"FLYNI\\x00"
    version      u8
    tag          u8       representation in the low nibble, distilled flag
                          in bit 4
    manifest     32 bytes digest of the chain manifest the proof was made for
    body         the encoded proof, gzipped as a whole for the zipped
                 representation
"""

import gzip
import json
import zlib
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple, Optional, Union

from .chain import ConsensusRules, DistilledHeader, FormatError, Header
from .mmr import MmrNode
from .util import atomic_write, canonical_json

REPRESENTATIONS = ("json", "binary", "zipped")
SCOPES = ("per-item", "whole-proof")
FORMATS = ("normal", "distilled")

NI_MAGIC = b"FLYNI\x00"
NI_VERSION = 1

# EIP-7623 floor price of a non-zero calldata byte.
GAS_PER_NONZERO_BYTE = 40


class DecodeError(ValueError):
    """
    Raised when bytes cannot be decoded in the expected encoding.
    """


@dataclass(frozen=True)
class Encoding:
    representation: str = "binary"
    scope: str = "per-item"
    format: str = "normal"
    level: int = 6

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation: {self.representation}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope: {self.scope}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format: {self.format}")
        assert 0 <= self.level <= 9, "gzip level must lie in [0, 9]"

    @property
    def tag(self) -> int:
        return REPRESENTATIONS.index(self.representation) | (
            (self.format == "distilled") << 4
        )

    @classmethod
    def from_tag(cls, tag: int, scope: str = "whole-proof", level: int = 6) -> "Encoding":
        rep = tag & 0x0F
        if rep >= len(REPRESENTATIONS) or tag & ~0x1F:
            raise DecodeError(f"unknown encoding tag: {tag:#04x}")
        return cls(
            representation=REPRESENTATIONS[rep],
            scope=scope,
            format="distilled" if tag & 0x10 else "normal",
            level=level,
        )


def gzip_bytes(data: bytes, level: int = 6) -> bytes:
    return gzip.compress(data, compresslevel=level, mtime=0)


def gunzip_bytes(data: bytes) -> bytes:
    try:
        return gzip.decompress(data)
    except (OSError, EOFError, zlib.error) as exc:
        raise DecodeError(f"bad gzip stream: {exc}")


def _as_format(header, enc: Encoding, rules: ConsensusRules):
    if enc.format == "distilled" and isinstance(header, Header):
        return rules.pow_engine.distill(header)
    if enc.format == "normal" and isinstance(header, DistilledHeader):
        raise FormatError("a distilled header has no full encoding")
    return header


def _check_node_format(enc: Encoding, rules: ConsensusRules):
    if enc.format == "distilled" and rules.node_format != "distilled":
        raise FormatError(f"{rules.node_format} nodes have no distilled encoding")


def encode(item: Any, enc: Encoding, rules: ConsensusRules) -> bytes:
    """
    Encode a header, an MMR node or a proof bundle.

    Proof bundles are any object with to_bytes(rules) and to_json()
    methods.
    """
    if isinstance(item, (Header, DistilledHeader)):
        header = _as_format(item, enc, rules)
        return _finish(header.serialize(), header.to_json(), enc)
    elif isinstance(item, MmrNode):
        _check_node_format(enc, rules)
        return _finish(rules.mmr_format.serialize(item), item.to_json(), enc)
    elif hasattr(item, "to_bytes") and hasattr(item, "to_json"):
        return _finish(item.to_bytes(rules), item.to_json(), enc)
    raise TypeError(f"cannot encode {type(item).__name__}")


def _finish(binary: bytes, obj: Any, enc: Encoding) -> bytes:
    if enc.representation == "json":
        return canonical_json(obj)
    elif enc.representation == "zipped":
        return gzip_bytes(binary, enc.level)
    return binary


def decode(data: bytes, kind: str, enc: Encoding, rules: ConsensusRules, height: int = 0):
    """
    Decode a header or node encoded by encode().

    :param kind: "header" or "node".
    """
    try:
        if enc.representation == "json":
            obj = json.loads(data)
            if kind == "node":
                return MmrNode.from_json(obj)
            elif enc.format == "distilled":
                return DistilledHeader.from_json(obj)
            return Header.from_json(obj)
        if enc.representation == "zipped":
            data = gunzip_bytes(data)
        if kind == "node":
            return rules.mmr_format.parse(data)
        elif enc.format == "distilled":
            return DistilledHeader.parse(data, height)
        return Header.parse(data, height)
    except DecodeError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise DecodeError(f"cannot decode {kind}: {exc}")


def encode_item(kind: str, payload: Any, enc: Encoding, rules: ConsensusRules) -> bytes:
    """
    Encode one response downloaded by a verifier.
    """
    binary = item_binary(kind, payload, enc, rules)
    if enc.representation == "binary":
        return binary
    elif enc.representation == "zipped":
        return gzip_bytes(binary, enc.level)
    return canonical_json(item_json(kind, payload, enc, rules))


def item_binary(kind: str, payload: Any, enc: Encoding, rules: ConsensusRules) -> bytes:
    if kind == "header":
        return _as_format(payload, enc, rules).serialize()
    elif kind == "node":
        _check_node_format(enc, rules)
        return rules.mmr_format.serialize(payload)
    elif kind == "auth_root":
        return payload
    elif kind == "work":
        return payload.to_bytes(32, "big")
    elif kind == "height":
        return payload.to_bytes(8, "little")
    elif kind == "info":
        tip = _as_format(payload.tip_header, enc, rules)
        return (
            payload.block_count.to_bytes(8, "little")
            + payload.total_work.to_bytes(32, "big")
            + tip.serialize()
        )
    raise ValueError(f"unknown item kind: {kind}")


def item_json(kind: str, payload: Any, enc: Encoding, rules: ConsensusRules) -> Any:
    if kind == "header":
        return _as_format(payload, enc, rules).to_json()
    elif kind == "node":
        return payload.to_json()
    elif kind == "auth_root":
        return dict(authdataroot=payload.hex())
    elif kind == "work":
        return dict(totalwork=f"{payload:064x}")
    elif kind == "height":
        return dict(height=payload)
    elif kind == "info":
        return dict(
            blocks=payload.block_count,
            totalwork=f"{payload.total_work:064x}",
            tip=_as_format(payload.tip_header, enc, rules).to_json(),
        )
    raise ValueError(f"unknown item kind: {kind}")


def measure_transcript(items: Iterable, enc: Encoding, rules: ConsensusRules) -> int:
    """
    Count the payload bytes of a transcript, without transport overhead.

    Items need kind and payload attributes. With whole-proof scope, the
    zipped size is that of a single gzip stream over every item.
    """
    items = list(items)
    if enc.scope == "whole-proof" and enc.representation == "zipped":
        if not items:
            return 0
        binary = b"".join(item_binary(x.kind, x.payload, enc, rules) for x in items)
        return len(gzip_bytes(binary, enc.level))
    return sum(len(encode_item(x.kind, x.payload, enc, rules)) for x in items)


class GasEstimate(NamedTuple):
    gas: int
    cost: float
    approximate: bool


def gas_estimate(
    proof: Union[int, bytes],
    gas_price_gwei: float = 0.125,
    token_price: float = 2100.0,
) -> GasEstimate:
    """
    Estimate the calldata gas and currency cost of submitting a proof.

    Given a byte string, only its non-zero bytes are charged, as the floor
    pricing does for non-zero bytes; given a size, every byte is assumed
    non-zero and the result is flagged as approximate.
    """
    if isinstance(proof, (bytes, bytearray)):
        nonzero = len(proof) - proof.count(0)
        approximate = False
    else:
        nonzero = int(proof)
        approximate = True
    gas = GAS_PER_NONZERO_BYTE * nonzero
    cost = gas * gas_price_gwei * 1e-9 * token_price
    return GasEstimate(gas=gas, cost=cost, approximate=approximate)


class NiFile(NamedTuple):
    encoding: Encoding
    manifest_digest: bytes
    body: bytes


def pack_ni_file(body: bytes, enc: Encoding, manifest_digest: bytes) -> bytes:
    """
    Frame an encoded proof body, gzipping it as a whole when zipped.
    """
    assert len(manifest_digest) == 32, "manifest digest must be 32 bytes"
    if enc.representation == "zipped":
        body = gzip_bytes(body, enc.level)
    return NI_MAGIC + bytes([NI_VERSION, enc.tag]) + manifest_digest + body


def unpack_ni_file(data: bytes) -> NiFile:
    header_size = len(NI_MAGIC) + 2 + 32
    if len(data) < header_size or not data.startswith(NI_MAGIC):
        raise DecodeError("not a non-interactive proof file")
    version = data[len(NI_MAGIC)]
    if version != NI_VERSION:
        raise DecodeError(f"unsupported proof file version: {version}")
    enc = Encoding.from_tag(data[len(NI_MAGIC) + 1])
    digest = data[len(NI_MAGIC) + 2 : header_size]
    body = data[header_size:]
    if enc.representation == "zipped":
        body = gunzip_bytes(body)
    return NiFile(encoding=enc, manifest_digest=digest, body=body)


def read_ni_file(path: str) -> NiFile:
    with open(path, "rb") as f:
        return unpack_ni_file(f.read())


def ni_body(proof: Any, enc: Encoding, rules: ConsensusRules) -> bytes:
    if enc.representation == "json":
        return canonical_json(proof.to_json())
    return proof.to_bytes(rules)


def write_ni_file(
    path: str, proof: Any, enc: Encoding, rules: ConsensusRules, manifest_digest: bytes
) -> int:
    """
    Write a proof bundle to a file, returning the file size in bytes.
    """
    data = pack_ni_file(ni_body(proof, enc, rules), enc, manifest_digest)
    atomic_write(path, data)
    return len(data)
