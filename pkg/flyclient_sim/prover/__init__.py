from .rpc import RpcHandlers, RpcRequest, create_app, parse_listen, serve
from .service import (
    STORE_NAME,
    BlockchainInfo,
    ChainNodes,
    NotFoundError,
    ProverService,
    ServiceUnavailableError,
)
from .store import NodeStore, StoreError, sync_store

__all__ = [
    "RpcHandlers",
    "RpcRequest",
    "create_app",
    "parse_listen",
    "serve",
    "STORE_NAME",
    "BlockchainInfo",
    "ChainNodes",
    "NotFoundError",
    "ProverService",
    "ServiceUnavailableError",
    "NodeStore",
    "StoreError",
    "sync_store",
]
