"""
A single-file, append-only store of persistent MMR nodes.

The file starts with an 8-byte magic string, followed by records:

    kind    u8       1 for a node, 2 for the metadata record
    branch  u32 LE   consensus branch id (0 for metadata)
    index   u64 LE   creation-order node index within the branch
    length  u32 LE   payload length
    payload          serialized node, or canonical JSON metadata

A sync writes every node and then exactly one metadata record, which marks
the store as complete. The in-memory index is rebuilt by scanning the file
when it is reopened.
"""

import json
import os
import threading
from typing import Any, Dict, Iterable, List, Optional, Tuple

from tqdm.auto import tqdm

from ..chain import ChainError, ConsensusRules, Header, iter_header_records, load_manifest
from ..chain import manifest_digest as compute_manifest_digest
from ..mmr import LeafMeta, Mmr, MmrNode, NodeFormat, make_node_format
from ..util import ZERO_HASH, canonical_json

STORE_MAGIC = b"FLYSTORE"
NODE_RECORD = 1
META_RECORD = 2
RECORD_HEADER_SIZE = 1 + 4 + 8 + 4
SYNC_MODES = ("during-sync", "post-hoc")

HeaderRecord = Tuple[int, bytes, Header]


class StoreError(ValueError):
    """
    Raised when a store file is corrupt or written out of order.
    """


class NodeStore:
    """
    Persistent MMR nodes keyed by (branch_id, index).

    Reads may come from several threads at once; appends must come from a
    single writer before the store is sealed.
    """

    def __init__(self, path: str, node_format: NodeFormat, file_obj):
        self.path = path
        self.node_format = node_format
        self.meta: Optional[Dict[str, Any]] = None
        self._file = file_obj
        self._index: Dict[Tuple[int, int], Tuple[int, int]] = {}
        self._counts: Dict[int, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def create(cls, path: str, node_format: NodeFormat) -> "NodeStore":
        f = open(path, "w+b")
        f.write(STORE_MAGIC)
        return cls(path, node_format, f)

    @classmethod
    def open(cls, path: str, node_format: Optional[NodeFormat] = None) -> "NodeStore":
        """
        Reopen a store, rebuilding the index. Without a node format, the one
        named in the metadata record is used.
        """
        with open(path, "rb") as f:
            data = f.read()
        if not data.startswith(STORE_MAGIC):
            raise StoreError(f"not a node store: {path}")
        entries = []
        meta = None
        offset = len(STORE_MAGIC)
        while offset < len(data):
            if meta is not None:
                raise StoreError("records after the metadata record")
            if offset + RECORD_HEADER_SIZE > len(data):
                raise StoreError(f"truncated record header at offset {offset}")
            kind = data[offset]
            branch_id = int.from_bytes(data[offset + 1 : offset + 5], "little")
            index = int.from_bytes(data[offset + 5 : offset + 13], "little")
            length = int.from_bytes(data[offset + 13 : offset + 17], "little")
            start = offset + RECORD_HEADER_SIZE
            if start + length > len(data):
                raise StoreError(f"truncated record at offset {offset}")
            if kind == NODE_RECORD:
                entries.append((branch_id, index, start, length))
            elif kind == META_RECORD:
                meta = _load_meta(data[start : start + length])
            else:
                raise StoreError(f"unknown record kind {kind} at offset {offset}")
            offset = start + length

        if node_format is None:
            if meta is None:
                raise StoreError("an unsealed store needs an explicit node format")
            node_format = make_node_format(meta["node_format"])
        res = cls(path, node_format, open(path, "r+b"))
        for branch_id, index, start, length in entries:
            res._add_to_index(branch_id, index, start, length)
        res.meta = meta
        return res

    @property
    def synced(self) -> bool:
        return self.meta is not None

    def branches(self) -> List[int]:
        return sorted(self._counts)

    def node_count(self, branch_id: int) -> int:
        return self._counts.get(branch_id, 0)

    def append_node(self, branch_id: int, index: int, node: MmrNode):
        assert self.meta is None, "cannot append to a sealed store"
        if index != self.node_count(branch_id):
            raise StoreError(
                f"branch {branch_id}: expected node {self.node_count(branch_id)}, got {index}"
            )
        payload = self.node_format.serialize(node)
        with self._lock:
            self._file.seek(0, os.SEEK_END)
            start = self._file.tell() + RECORD_HEADER_SIZE
            self._file.write(_record_header(NODE_RECORD, branch_id, index, len(payload)))
            self._file.write(payload)
            self._add_to_index(branch_id, index, start, len(payload))

    def seal(self, meta: Dict[str, Any]):
        assert self.meta is None, "store is already sealed"
        payload = canonical_json(meta)
        with self._lock:
            self._file.seek(0, os.SEEK_END)
            self._file.write(_record_header(META_RECORD, 0, 0, len(payload)))
            self._file.write(payload)
            self._file.flush()
            os.fsync(self._file.fileno())
        self.meta = meta

    def node(self, branch_id: int, index: int) -> MmrNode:
        """
        :raises KeyError: if the store holds no such node.
        """
        start, length = self._index[branch_id, index]
        with self._lock:
            self._file.seek(start)
            payload = self._file.read(length)
        return self.node_format.parse(payload)

    def close(self):
        self._file.close()

    def __enter__(self) -> "NodeStore":
        return self

    def __exit__(self, *_):
        self.close()

    def _add_to_index(self, branch_id: int, index: int, start: int, length: int):
        expected = self._counts.get(branch_id, 0)
        if index != expected:
            raise StoreError(f"branch {branch_id}: expected node {expected}, got {index}")
        self._index[branch_id, index] = (start, length)
        self._counts[branch_id] = expected + 1


def _load_meta(data: bytes) -> Dict[str, Any]:
    try:
        return json.loads(data)
    except ValueError as exc:
        raise StoreError(f"corrupt metadata record: {exc}")


def _record_header(kind: int, branch_id: int, index: int, length: int) -> bytes:
    return (
        bytes([kind])
        + branch_id.to_bytes(4, "little")
        + index.to_bytes(8, "little")
        + length.to_bytes(4, "little")
    )


class _HistorySync:
    """
    Rebuild branch MMRs from a header stream, checking that every header
    links to its parent and commits to the MMR before it.
    """

    def __init__(self, rules: ConsensusRules, store: NodeStore):
        self.rules = rules
        self.store = store
        self.engine = rules.pow_engine
        self.mmrs: List[Mmr] = []
        self.block_hashes: List[bytes] = []
        self.headers: List[Header] = []

    def link(self, header: Header):
        height = len(self.headers)
        prev_hash = self.block_hashes[-1] if height else ZERO_HASH
        if header.prev_hash != prev_hash:
            raise ChainError("header does not link to its parent", height)
        self.headers.append(header)
        self.block_hashes.append(self.engine.digest(header))

    def open_branch(self, height: int):
        if self.rules.branch_of(height) == len(self.mmrs):
            self.mmrs.append(
                Mmr(self.rules.mmr_format, branch_id=len(self.mmrs), start_height=height)
            )

    def append_leaf(self, height: int):
        header = self.headers[height]
        mmr = self.mmrs[self.rules.branch_of(height)]
        meta = LeafMeta(time=header.time, bits=header.bits, height=height)
        for index in mmr.append_leaf(self.block_hashes[height], meta):
            self.store.append_node(mmr.branch_id, index, mmr.nodes[index])

    def check_commitment(self, height: int, auth_root: bytes):
        header = self.headers[height]
        if height == 0:
            expected = ZERO_HASH
        else:
            branch_id, _, leaf_count = self.rules.committed_range(height)
            root = self.mmrs[branch_id].root(leaf_count)
            expected = self.rules.history_commitment(root, auth_root)
        if header.commitment_field != expected:
            raise ChainError("history commitment mismatch", height)

    def metadata(self, digest: bytes) -> Dict[str, Any]:
        return dict(
            manifest_digest=digest.hex(),
            block_count=len(self.headers),
            leaf_counts=[m.leaf_count for m in self.mmrs],
            node_format=self.rules.node_format,
        )


def sync_store(
    chain_dir: str,
    store_path: str,
    mode: str = "during-sync",
    progress: bool = False,
) -> NodeStore:
    """
    Build the node store of a persisted chain.

    In during-sync mode, nodes are written as each header is read, the way
    a node fills its database while downloading blocks. In post-hoc mode,
    every header is read and linked first, and the nodes are regenerated
    from the finalized headers afterwards. Both modes produce byte-identical
    stores.

    :raises ChainError: if a header record is corrupt, does not link to its
                        parent, or commits to the wrong history.
    """
    if mode not in SYNC_MODES:
        raise ValueError(f"unknown sync mode: {mode}")
    manifest = load_manifest(chain_dir)
    rules = ConsensusRules.from_json(manifest["rules"])
    records = iter_header_records(chain_dir, rules)
    if progress:
        records = tqdm(records, total=manifest["block_count"], desc="syncing", unit="block")

    tmp_path = store_path + ".tmp"
    store = NodeStore.create(tmp_path, rules.mmr_format)
    try:
        syncer = _HistorySync(rules, store)
        if mode == "during-sync":
            _sync_during_download(syncer, records)
        else:
            _sync_post_hoc(syncer, list(records))
        if len(syncer.headers) != manifest["block_count"]:
            raise ChainError(
                f"expected {manifest['block_count']} headers, found {len(syncer.headers)}",
                len(syncer.headers),
            )
        store.seal(syncer.metadata(compute_manifest_digest(manifest)))
    except BaseException:
        store.close()
        os.remove(tmp_path)
        raise
    store.close()
    os.replace(tmp_path, store_path)
    return NodeStore.open(store_path, rules.mmr_format)


def _sync_during_download(syncer: _HistorySync, records: Iterable[HeaderRecord]):
    for height, auth_root, header in records:
        syncer.link(header)
        syncer.open_branch(height)
        if height:
            syncer.append_leaf(height - 1)
        syncer.check_commitment(height, auth_root)


def _sync_post_hoc(syncer: _HistorySync, records: List[HeaderRecord]):
    for _, _, header in records:
        syncer.link(header)
    for height in range(len(records)):
        syncer.open_branch(height)
        if height + 1 < len(records):
            syncer.append_leaf(height)
    for height, auth_root, _ in records:
        syncer.check_commitment(height, auth_root)
