from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple

from ..util import (
    HashFn,
    compact_size,
    read_compact_size,
    sha256,
    work_from_bits,
)


@dataclass(frozen=True)
class LeafMeta:
    """
    The per-header values an MMR leaf aggregates.
    """

    time: int
    bits: int
    height: int


@dataclass(frozen=True)
class MmrNode:
    """
    A persistent or generated MMR node.

    Leaves have identical earliest/latest fields; internal nodes take the
    earliest fields from their left child and the latest fields from their
    right child. The aux field is opaque to the MMR and owned by the
    NodeFormat that produced the node.
    """

    commitment: bytes
    earliest_time: int
    latest_time: int
    earliest_bits: int
    latest_bits: int
    earliest_height: int
    latest_height: int
    work: int
    aux: bytes = b""

    @property
    def leaf_span(self) -> int:
        return self.latest_height - self.earliest_height + 1

    def to_json(self) -> dict:
        return dict(
            commitment=self.commitment.hex(),
            earliest_time=self.earliest_time,
            latest_time=self.latest_time,
            earliest_bits=f"{self.earliest_bits:08x}",
            latest_bits=f"{self.latest_bits:08x}",
            earliest_height=self.earliest_height,
            latest_height=self.latest_height,
            work=f"{self.work:064x}",
            aux=self.aux.hex(),
        )

    @classmethod
    def from_json(cls, obj: dict) -> "MmrNode":
        return cls(
            commitment=bytes.fromhex(obj["commitment"]),
            earliest_time=int(obj["earliest_time"]),
            latest_time=int(obj["latest_time"]),
            earliest_bits=int(obj["earliest_bits"], 16),
            latest_bits=int(obj["latest_bits"], 16),
            earliest_height=int(obj["earliest_height"]),
            latest_height=int(obj["latest_height"]),
            work=int(obj["work"], 16),
            aux=bytes.fromhex(obj["aux"]),
        )


class NodeFormat(ABC):
    """
    A canonical node serialization plus the rules for deriving and merging
    the format-specific aux fields.

    Parent commitments hash the serialized children, so two chains built
    with different formats have unrelated roots.
    """

    name = "abstract"

    def __init__(self, hash_fn: HashFn = sha256):
        self.hash_fn = hash_fn

    @abstractmethod
    def serialize(self, node: MmrNode) -> bytes:
        """
        Encode a node in the canonical wire layout.
        """

    @abstractmethod
    def parse_from(self, data: bytes, offset: int) -> Tuple[MmrNode, int]:
        """
        Decode one node starting at offset, returning (node, next_offset).
        """

    @abstractmethod
    def leaf_aux(self, digest: bytes, branch_id: int) -> bytes:
        """
        Derive the aux fields of a leaf from its header digest.
        """

    @abstractmethod
    def merge_aux(self, left: bytes, right: bytes) -> bytes:
        """
        Combine the aux fields of two sibling subtrees.
        """

    def parse(self, data: bytes) -> MmrNode:
        node, end = self.parse_from(data, 0)
        if end != len(data):
            raise ValueError(f"trailing bytes after {self.name} node")
        return node

    def leaf(self, digest: bytes, meta: LeafMeta, branch_id: int = 0) -> MmrNode:
        return MmrNode(
            commitment=digest,
            earliest_time=meta.time,
            latest_time=meta.time,
            earliest_bits=meta.bits,
            latest_bits=meta.bits,
            earliest_height=meta.height,
            latest_height=meta.height,
            work=work_from_bits(meta.bits),
            aux=self.leaf_aux(digest, branch_id),
        )

    def combine(self, left: MmrNode, right: MmrNode) -> MmrNode:
        return MmrNode(
            commitment=self.hash_fn(self.serialize(left) + self.serialize(right)),
            earliest_time=left.earliest_time,
            latest_time=right.latest_time,
            earliest_bits=left.earliest_bits,
            latest_bits=right.latest_bits,
            earliest_height=left.earliest_height,
            latest_height=right.latest_height,
            work=left.work + right.work,
            aux=self.merge_aux(left.aux, right.aux),
        )


def _read(data: bytes, offset: int, size: int) -> Tuple[bytes, int]:
    end = offset + size
    if end > len(data):
        raise ValueError("truncated node")
    return data[offset:end], end


def _read_int(data: bytes, offset: int, size: int, order="little") -> Tuple[int, int]:
    raw, end = _read(data, offset, size)
    return int.from_bytes(raw, order), end


class PlainFormat(NodeFormat):
    """
    Commitment, timestamps, targets, compact-size heights and big-endian
    work, with no aux fields.
    """

    name = "plain"

    def serialize(self, node: MmrNode) -> bytes:
        return self._core(node) + node.aux

    def _core(self, node: MmrNode) -> bytes:
        return b"".join(
            [
                node.commitment,
                node.earliest_time.to_bytes(4, "little"),
                node.latest_time.to_bytes(4, "little"),
                node.earliest_bits.to_bytes(4, "little"),
                node.latest_bits.to_bytes(4, "little"),
                compact_size(node.earliest_height),
                compact_size(node.latest_height),
                node.work.to_bytes(32, "big"),
            ]
        )

    def _parse_core(self, data: bytes, offset: int) -> Tuple[dict, int]:
        commitment, offset = _read(data, offset, 32)
        earliest_time, offset = _read_int(data, offset, 4)
        latest_time, offset = _read_int(data, offset, 4)
        earliest_bits, offset = _read_int(data, offset, 4)
        latest_bits, offset = _read_int(data, offset, 4)
        earliest_height, offset = read_compact_size(data, offset)
        latest_height, offset = read_compact_size(data, offset)
        work, offset = _read_int(data, offset, 32, "big")
        fields = dict(
            commitment=commitment,
            earliest_time=earliest_time,
            latest_time=latest_time,
            earliest_bits=earliest_bits,
            latest_bits=latest_bits,
            earliest_height=earliest_height,
            latest_height=latest_height,
            work=work,
        )
        return fields, offset

    def parse_from(self, data: bytes, offset: int) -> Tuple[MmrNode, int]:
        fields, offset = self._parse_core(data, offset)
        return MmrNode(**fields), offset

    def leaf_aux(self, digest: bytes, branch_id: int) -> bytes:
        return b""

    def merge_aux(self, left: bytes, right: bytes) -> bytes:
        return b""


class ZcashFormat(PlainFormat):
    """
    The plain layout followed by emulated shielded-pool metadata: the
    earliest and latest Sapling roots, a Sapling transaction count, the
    earliest and latest Orchard roots and an Orchard transaction count.

    Serialized nodes are between 212 and 244 bytes depending on the widths
    of the four compact-size integers.
    """

    name = "zcash"

    def parse_from(self, data: bytes, offset: int) -> Tuple[MmrNode, int]:
        fields, offset = self._parse_core(data, offset)
        start = offset
        _, offset = _read(data, offset, 64)
        _, offset = read_compact_size(data, offset)
        _, offset = _read(data, offset, 64)
        _, offset = read_compact_size(data, offset)
        return MmrNode(aux=data[start:offset], **fields), offset

    def leaf_aux(self, digest: bytes, branch_id: int) -> bytes:
        sapling_root = self.hash_fn(b"sapling" + digest)
        orchard_root = self.hash_fn(b"orchard" + digest)
        sapling_txs = int.from_bytes(digest[:2], "little") % 300
        orchard_txs = int.from_bytes(digest[2:4], "little") % 300
        return self._encode_aux(
            (sapling_root, sapling_root, sapling_txs, orchard_root, orchard_root, orchard_txs)
        )

    def merge_aux(self, left: bytes, right: bytes) -> bytes:
        l_fields = self._decode_aux(left)
        r_fields = self._decode_aux(right)
        return self._encode_aux(
            (
                l_fields[0],
                r_fields[1],
                l_fields[2] + r_fields[2],
                l_fields[3],
                r_fields[4],
                l_fields[5] + r_fields[5],
            )
        )

    @staticmethod
    def _encode_aux(fields: tuple) -> bytes:
        s_early, s_late, s_count, o_early, o_late, o_count = fields
        return b"".join(
            [
                s_early,
                s_late,
                compact_size(s_count),
                o_early,
                o_late,
                compact_size(o_count),
            ]
        )

    @staticmethod
    def _decode_aux(aux: bytes) -> tuple:
        s_early, offset = _read(aux, 0, 32)
        s_late, offset = _read(aux, offset, 32)
        s_count, offset = read_compact_size(aux, offset)
        o_early, offset = _read(aux, offset, 32)
        o_late, offset = _read(aux, offset, 32)
        o_count, offset = read_compact_size(aux, offset)
        if offset != len(aux):
            raise ValueError("trailing bytes in zcash aux fields")
        return s_early, s_late, s_count, o_early, o_late, o_count


class DistilledFormat(NodeFormat):
    """
    A fixed 140-byte layout in which every field the light client does not
    need is folded into a single hash.

    Aux is the 4-byte consensus branch id followed by other_fields_hash.
    For leaves that hash covers the emulated shielded metadata; for internal
    nodes it is H(left.other_fields_hash || right.other_fields_hash).
    """

    name = "distilled"
    size = 140

    def serialize(self, node: MmrNode) -> bytes:
        assert len(node.aux) == 36, "distilled nodes carry a 36-byte aux field"
        return b"".join(
            [
                node.commitment,
                node.earliest_time.to_bytes(8, "little"),
                node.latest_time.to_bytes(8, "little"),
                node.earliest_bits.to_bytes(4, "little"),
                node.latest_bits.to_bytes(4, "little"),
                node.earliest_height.to_bytes(8, "little"),
                node.latest_height.to_bytes(8, "little"),
                node.work.to_bytes(32, "big"),
                node.aux,
            ]
        )

    def parse_from(self, data: bytes, offset: int) -> Tuple[MmrNode, int]:
        commitment, offset = _read(data, offset, 32)
        earliest_time, offset = _read_int(data, offset, 8)
        latest_time, offset = _read_int(data, offset, 8)
        earliest_bits, offset = _read_int(data, offset, 4)
        latest_bits, offset = _read_int(data, offset, 4)
        earliest_height, offset = _read_int(data, offset, 8)
        latest_height, offset = _read_int(data, offset, 8)
        work, offset = _read_int(data, offset, 32, "big")
        aux, offset = _read(data, offset, 36)
        node = MmrNode(
            commitment=commitment,
            earliest_time=earliest_time,
            latest_time=latest_time,
            earliest_bits=earliest_bits,
            latest_bits=latest_bits,
            earliest_height=earliest_height,
            latest_height=latest_height,
            work=work,
            aux=aux,
        )
        return node, offset

    def leaf_aux(self, digest: bytes, branch_id: int) -> bytes:
        other = ZcashFormat(self.hash_fn).leaf_aux(digest, branch_id)
        return branch_id.to_bytes(4, "little") + self.hash_fn(other)

    def merge_aux(self, left: bytes, right: bytes) -> bytes:
        return left[:4] + self.hash_fn(left[4:] + right[4:])


def make_node_format(name: str, hash_fn: HashFn = sha256) -> NodeFormat:
    """
    Create a node format from a human-readable name.
    """
    if name == "plain":
        return PlainFormat(hash_fn)
    elif name == "zcash":
        return ZcashFormat(hash_fn)
    elif name == "distilled":
        return DistilledFormat(hash_fn)
    else:
        raise ValueError(f"unknown node format: {name}")

