"""
Ways for a verifier to talk to a prover: in process, over JSON-RPC, or
against a recorded non-interactive bundle.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple

import requests

from ..chain import AnyHeader, ConsensusRules, DistilledHeader, Header
from ..mmr import MmrNode
from ..prover import BlockchainInfo, NotFoundError, ProverService, ServiceUnavailableError


class TransportError(IOError):
    """
    Raised when a prover cannot be reached or answers with something that
    is not a JSON-RPC response.
    """


class ProverError(ValueError):
    """
    Raised when a prover answers a query with an error, which a verifier
    treats as a rejection.
    """

    def __init__(self, code: int, message: str):
        super().__init__(f"prover error {code}: {message}")
        self.code = code


class MissingItemError(ProverError):
    """
    Raised when a non-interactive bundle lacks an item the verifier asks
    for.
    """

    def __init__(self, message: str):
        super().__init__(-32004, message)


class ProverHandle(ABC):
    """
    The six queries a verifier may send to a prover.
    """

    name = "prover"

    @abstractmethod
    def get_blockchain_info(self) -> BlockchainInfo:
        """
        Get the declared block count, total work and tip header.
        """

    @abstractmethod
    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        """
        Get the header at a height, optionally in distilled form.
        """

    @abstractmethod
    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        """
        Get a persistent MMR node of a consensus branch.
        """

    @abstractmethod
    def get_auth_data_root(self, height: int) -> bytes:
        """
        Get the auth data root committed next to the history root.
        """

    @abstractmethod
    def get_total_work(self, height: int) -> int:
        """
        Get the total work from genesis up to a height, inclusive.
        """

    @abstractmethod
    def get_height_with_total_work(self, work: int) -> int:
        """
        Get the lowest height whose total work reaches work.
        """


class LocalProver(ProverHandle):
    """
    Call a ProverService in process, with the same error semantics as the
    JSON-RPC transport.
    """

    def __init__(self, service: ProverService, name: str = "local"):
        self.service = service
        self.name = name

    def get_blockchain_info(self) -> BlockchainInfo:
        return self._call(self.service.get_blockchain_info)

    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        return self._call(self.service.get_block_header, height, distilled)

    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        return self._call(self.service.get_history_node, branch_id, index)

    def get_auth_data_root(self, height: int) -> bytes:
        return self._call(self.service.get_auth_data_root, height)

    def get_total_work(self, height: int) -> int:
        return self._call(self.service.get_total_work, height)

    def get_height_with_total_work(self, work: int) -> int:
        return self._call(self.service.get_height_with_total_work, work)

    @staticmethod
    def _call(fn, *args):
        try:
            return fn(*args)
        except NotFoundError as exc:
            raise ProverError(-32004, str(exc))
        except ServiceUnavailableError as exc:
            raise TransportError(str(exc))
        except ValueError as exc:
            raise ProverError(-32602, str(exc))


class HttpProver(ProverHandle):
    """
    Query a prover over JSON-RPC.

    :param client: an object with a requests-style post() method, such as a
                   requests.Session; defaults to a new session.
    """

    def __init__(
        self,
        url: str,
        rules: ConsensusRules,
        client: Optional[Any] = None,
        timeout: float = 30.0,
        name: Optional[str] = None,
    ):
        self.url = url
        self.rules = rules
        self.client = client if client is not None else requests.Session()
        self.timeout = timeout
        self.name = name or url
        self._next_id = 0

    def call(self, method: str, *params) -> Any:
        self._next_id += 1
        payload = dict(jsonrpc="2.0", id=self._next_id, method=method, params=list(params))
        try:
            response = self.client.post(self.url, json=payload, timeout=self.timeout)
            body = response.json()
        except requests.RequestException as exc:
            raise TransportError(f"{self.url}: {exc}")
        except ValueError as exc:
            raise TransportError(f"{self.url}: malformed response: {exc}")
        if not isinstance(body, dict) or ("result" not in body and "error" not in body):
            raise TransportError(f"{self.url}: not a JSON-RPC response")
        error = body.get("error")
        if error is not None:
            if error.get("code") == -32003:
                raise TransportError(f"{self.url}: {error.get('message')}")
            raise ProverError(error.get("code", 0), error.get("message", ""))
        return body["result"]

    def get_blockchain_info(self) -> BlockchainInfo:
        return self._decode(self._parse_info, self.call("getblockchaininfo", 0))

    @staticmethod
    def _parse_info(result: Dict[str, Any]) -> BlockchainInfo:
        block_count = int(result["blocks"])
        return BlockchainInfo(
            block_count=block_count,
            total_work=int(result["totalwork"], 16),
            tip_header=Header.parse(bytes.fromhex(result["tip"]), block_count - 1),
        )

    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        result = self.call("getblockheader", height, 0, "distilled" if distilled else "full")
        parser = DistilledHeader.parse if distilled else Header.parse
        return self._decode(parser, self._hex(result), height)

    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        result = self.call("gethistorynode", branch_id, index, 0)
        return self._decode(self.rules.mmr_format.parse, self._hex(result))

    def get_auth_data_root(self, height: int) -> bytes:
        res = self._hex(self.call("getauthdataroot", height))
        if len(res) != 32:
            raise ProverError(-32602, "auth data root must be 32 bytes")
        return res

    def get_total_work(self, height: int) -> int:
        return self._decode(int, self.call("gettotalwork", height), 16)

    def get_height_with_total_work(self, work: int) -> int:
        return self._decode(int, self.call("getheightwithtotalwork", f"{work:x}"))

    def _hex(self, value: Any) -> bytes:
        return self._decode(bytes.fromhex, value)

    @staticmethod
    def _decode(fn, *args):
        try:
            return fn(*args)
        except (TypeError, ValueError, KeyError) as exc:
            raise ProverError(-32602, f"undecodable answer: {exc}")


class RecordingProver(ProverHandle):
    """
    Forward queries to another prover, remembering every answer so they can
    be bundled into a non-interactive proof.
    """

    def __init__(self, inner: ProverHandle):
        self.inner = inner
        self.name = inner.name
        self.info: Optional[BlockchainInfo] = None
        self.headers: Dict[int, AnyHeader] = {}
        self.nodes: Dict[Tuple[int, int], MmrNode] = {}
        self.auth_roots: Dict[int, bytes] = {}
        self.total_works: Dict[int, int] = {}
        self.heights: Dict[int, int] = {}

    def get_blockchain_info(self) -> BlockchainInfo:
        self.info = self.inner.get_blockchain_info()
        return self.info

    def get_block_header(self, height: int, distilled: bool = False) -> AnyHeader:
        self.headers[height] = self.inner.get_block_header(height, distilled)
        return self.headers[height]

    def get_history_node(self, branch_id: int, index: int) -> MmrNode:
        self.nodes[branch_id, index] = self.inner.get_history_node(branch_id, index)
        return self.nodes[branch_id, index]

    def get_auth_data_root(self, height: int) -> bytes:
        self.auth_roots[height] = self.inner.get_auth_data_root(height)
        return self.auth_roots[height]

    def get_total_work(self, height: int) -> int:
        self.total_works[height] = self.inner.get_total_work(height)
        return self.total_works[height]

    def get_height_with_total_work(self, work: int) -> int:
        self.heights[work] = self.inner.get_height_with_total_work(work)
        return self.heights[work]
