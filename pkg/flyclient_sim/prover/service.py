import os
from typing import NamedTuple, Optional, Union

from ..chain import (
    AnyHeader,
    Chain,
    ChainError,
    load_chain,
    load_manifest,
    manifest_digest,
)
from ..mmr import MmrNode
from .store import NodeStore, StoreError, sync_store

STORE_NAME = "nodes.store"


class NotFoundError(ValueError):
    """
    Raised when a request names a height, node or work value the chain does
    not have.
    """


class ServiceUnavailableError(RuntimeError):
    """
    Raised when the prover cannot answer because its node store is not
    synced.
    """


class BlockchainInfo(NamedTuple):
    block_count: int
    total_work: int
    tip_header: AnyHeader


class ChainNodes:
    """
    Serve MMR nodes straight from an in-memory chain, standing in for a
    NodeStore when no store file is wanted.
    """

    synced = True

    def __init__(self, chain: Chain):
        self.chain = chain

    def node_count(self, branch_id: int) -> int:
        if not 0 <= branch_id < len(self.chain.branches):
            return 0
        return len(self.chain.branches[branch_id].mmr.nodes)

    def node(self, branch_id: int, index: int) -> MmrNode:
        if not 0 <= index < self.node_count(branch_id):
            raise KeyError((branch_id, index))
        return self.chain.branches[branch_id].mmr.nodes[index]


class ProverService:
    """
    Answer the six prover queries over one chain.

    The service performs no sampling or checking of its own: every answer
    is a lookup into the chain or the node store, so a service built on an
    adversarial fork lies exactly as consistently as that fork does.
    """

    def __init__(self, chain: Chain, nodes: Union[NodeStore, ChainNodes]):
        self.chain = chain
        self.nodes = nodes

    @classmethod
    def from_chain(cls, chain: Chain) -> "ProverService":
        return cls(chain, ChainNodes(chain))

    @classmethod
    def open(
        cls,
        chain_dir: str,
        store_path: Optional[str] = None,
        mode: str = "during-sync",
        resync: bool = False,
    ) -> "ProverService":
        """
        Load a chain directory, reusing its node store when the store was
        synced from the same manifest and syncing a new one otherwise.
        """
        if store_path is None:
            store_path = os.path.join(chain_dir, STORE_NAME)
        digest = manifest_digest(load_manifest(chain_dir)).hex()
        store = None
        if os.path.exists(store_path) and not resync:
            try:
                store = NodeStore.open(store_path)
            except StoreError:
                store = None
            if store is not None and (
                not store.synced or store.meta["manifest_digest"] != digest
            ):
                store.close()
                store = None
        if store is None:
            store = sync_store(chain_dir, store_path, mode=mode)
        return cls(load_chain(chain_dir), store)

    def close(self):
        if isinstance(self.nodes, NodeStore):
            self.nodes.close()

    def get_blockchain_info(self) -> BlockchainInfo:
        self._require_synced()
        return BlockchainInfo(
            block_count=self.chain.block_count,
            total_work=self.chain.total_work(),
            tip_header=self.chain.tip,
        )

    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        """
        :raises FormatError: if a distilled header is requested from a chain
                             whose engine has no distilled form.
        """
        self._require_synced()
        header = self._lookup(self.chain.header, height)
        if distilled:
            return self.chain.rules.pow_engine.distill(header)
        return header

    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        self._require_synced()
        try:
            return self.nodes.node(branch_id, index)
        except KeyError:
            raise NotFoundError(f"no history node {index} in branch {branch_id}")

    def get_auth_data_root(self, height: int) -> bytes:
        self._require_synced()
        return self._lookup(self.chain.auth_root, height)

    def get_total_work(self, height: int) -> int:
        self._require_synced()
        return self._lookup(self.chain.total_work, height)

    def get_height_with_total_work(self, work: int) -> int:
        self._require_synced()
        return self._lookup(self.chain.height_with_total_work, work)

    def _require_synced(self):
        if not self.nodes.synced:
            raise ServiceUnavailableError("node store is not synced")

    @staticmethod
    def _lookup(fn, arg):
        try:
            return fn(arg)
        except ChainError as exc:
            raise NotFoundError(str(exc))

