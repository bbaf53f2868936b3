"""
JSON-RPC 2.0 front end of a ProverService, served over HTTP.

Every request is a POST to "/" carrying {"jsonrpc", "id", "method",
"params"}, with positional params. Binary values (hashes, serialized
headers and nodes) are hex strings; 256-bit work values are 64-digit hex
strings. The methods are:

    getblockchaininfo([verbosity])
        -> {"blocks": int, "totalwork": hex, "bestblockhash": hex,
            "tip": header}
    getblockheader(height[, verbosity[, format]])
        -> header; format is "full" or "distilled"
    gethistorynode(branch, index[, verbosity])
        -> node
    getauthdataroot(height)
        -> hex
    gettotalwork(height)
        -> hex
    getheightwithtotalwork(work_hex)
        -> int

With verbosity 0 a header or node is the hex string of its binary
serialization; with verbosity 1 it is a JSON object with the codec's field
names. The default verbosity follows the service's representation mode.
"""

from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .service import NotFoundError, ProverService, ServiceUnavailableError

INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
UNAVAILABLE = -32003
NOT_FOUND = -32004

REPRESENTATIONS = ("json", "binary", "zipped")


class RpcRequest(BaseModel):
    jsonrpc: str = "2.0"
    id: Optional[Union[int, str]] = None
    method: str
    params: List[Any] = []


def rpc_result(request_id: Any, result: Any) -> Dict[str, Any]:
    return {"jsonrpc": "2.0", "id": request_id, "result": result}


def rpc_error(request_id: Any, code: int, message: str) -> Dict[str, Any]:
    return {"jsonrpc": "2.0", "id": request_id, "error": {"code": code, "message": message}}


class RpcHandlers:
    """
    Map JSON-RPC method names to service calls and encode the answers.
    """

    def __init__(self, service: ProverService, representation: str = "binary"):
        if representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation: {representation}")
        self.service = service
        self.rules = service.chain.rules
        self.default_verbosity = 1 if representation == "json" else 0
        self.methods: Dict[str, Callable[..., Any]] = dict(
            getblockchaininfo=self.getblockchaininfo,
            getblockheader=self.getblockheader,
            gethistorynode=self.gethistorynode,
            getauthdataroot=self.getauthdataroot,
            gettotalwork=self.gettotalwork,
            getheightwithtotalwork=self.getheightwithtotalwork,
        )

    def dispatch(self, method: str, params: List[Any], request_id: Any) -> Dict[str, Any]:
        handler = self.methods.get(method)
        if handler is None:
            return rpc_error(request_id, METHOD_NOT_FOUND, f"unknown method: {method}")
        try:
            return rpc_result(request_id, handler(*params))
        except NotFoundError as exc:
            return rpc_error(request_id, NOT_FOUND, str(exc))
        except ServiceUnavailableError as exc:
            return rpc_error(request_id, UNAVAILABLE, str(exc))
        except (TypeError, ValueError) as exc:
            return rpc_error(request_id, INVALID_PARAMS, str(exc))

    def getblockchaininfo(self, verbosity: Optional[int] = None) -> Dict[str, Any]:
        info = self.service.get_blockchain_info()
        return dict(
            blocks=info.block_count,
            totalwork=f"{info.total_work:064x}",
            bestblockhash=self.service.chain.block_hash(info.block_count - 1).hex(),
            tip=self._header(info.tip_header, verbosity),
        )

    def getblockheader(
        self, height: int, verbosity: Optional[int] = None, format: str = "full"
    ) -> Any:
        if format not in ("full", "distilled"):
            raise ValueError(f"unknown header format: {format}")
        header = self.service.get_block_header(
            _int_param(height, "height"), distilled=format == "distilled"
        )
        return self._header(header, verbosity)

    def gethistorynode(self, branch: int, index: int, verbosity: Optional[int] = None) -> Any:
        node = self.service.get_history_node(
            _int_param(branch, "branch"), _int_param(index, "index")
        )
        if self._verbosity(verbosity):
            return node.to_json()
        return self.rules.mmr_format.serialize(node).hex()

    def getauthdataroot(self, height: int) -> str:
        return self.service.get_auth_data_root(_int_param(height, "height")).hex()

    def gettotalwork(self, height: int) -> str:
        return f"{self.service.get_total_work(_int_param(height, 'height')):064x}"

    def getheightwithtotalwork(self, work: str) -> int:
        if not isinstance(work, str):
            raise ValueError("work must be a hex string")
        return self.service.get_height_with_total_work(int(work, 16))

    def _header(self, header, verbosity: Optional[int]) -> Any:
        if self._verbosity(verbosity):
            return header.to_json()
        return header.serialize().hex()

    def _verbosity(self, verbosity: Optional[int]) -> int:
        if verbosity is None:
            return self.default_verbosity
        if verbosity not in (0, 1) or isinstance(verbosity, bool):
            raise ValueError(f"verbosity must be 0 or 1, got {verbosity!r}")
        return verbosity


def _int_param(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return value


def create_app(service: ProverService, representation: str = "binary") -> FastAPI:
    handlers = RpcHandlers(service, representation)
    app = FastAPI(title="flyclient prover")

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        return JSONResponse(rpc_error(None, INVALID_REQUEST, "invalid JSON-RPC request"))

    # A sync endpoint runs in the threadpool; the service is read-only.
    @app.post("/")
    def rpc(request: RpcRequest):
        return handlers.dispatch(request.method, request.params, request.id)

    return app


def parse_listen(listen: str) -> Tuple[str, int]:
    """
    Split a host:port listen address.
    """
    host, sep, port = listen.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {listen!r}")
    return host, int(port)


def serve(service: ProverService, listen: str = "127.0.0.1:8232", representation: str = "binary"):
    host, port = parse_listen(listen)
    uvicorn.run(create_app(service, representation), host=host, port=port, log_level="info")
