"""
On-disk layout of a chain directory:

    manifest.json     parameters, seed, branches and summary values.
    headers.bin       one record per block: height (u64 LE), auth data
                      root (32 bytes), serialized header (fixed size for
                      the chain's PoW engine).
    branch_<id>.mmr   one record per persistent MMR node, in creation
                      order: length (u16 LE), serialized node.
"""

import json
import os
from typing import Any, Dict, Iterator, List, Tuple

from ..mmr import Mmr, MmrNode
from ..util import atomic_write, json_digest
from .chain import Chain, ChainBranch, ChainError
from .header import Header
from .rules import ConsensusRules

MANIFEST_NAME = "manifest.json"
HEADERS_NAME = "headers.bin"
FORMAT_VERSION = 1


def branch_file_name(branch_id: int) -> str:
    return f"branch_{branch_id}.mmr"


def chain_manifest(chain: Chain) -> Dict[str, Any]:
    return dict(
        version=FORMAT_VERSION,
        kind=chain.kind,
        seed=chain.seed,
        block_count=chain.block_count,
        rules=chain.rules.to_json(),
        branches=[
            dict(
                branch_id=b.branch_id,
                start_height=b.start_height,
                block_count=len(b.headers),
                leaf_count=b.mmr.leaf_count,
            )
            for b in chain.branches
        ],
        total_work=f"{chain.total_work():064x}",
        tip_hash=chain.block_hashes[-1].hex(),
        fork_info=chain.fork_info,
    )


def manifest_digest(manifest: Dict[str, Any]) -> bytes:
    return json_digest(manifest)


def save_chain(chain: Chain, out_dir: str) -> Dict[str, Any]:
    """
    Write a chain to a directory, returning the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for height, (header, auth_root) in enumerate(zip(chain.headers, chain.auth_roots)):
        records.append(height.to_bytes(8, "little") + auth_root + header.serialize())
    atomic_write(os.path.join(out_dir, HEADERS_NAME), b"".join(records))

    fmt = chain.rules.mmr_format
    for branch in chain.branches:
        data = []
        for node in branch.mmr.nodes:
            encoded = fmt.serialize(node)
            data.append(len(encoded).to_bytes(2, "little") + encoded)
        atomic_write(os.path.join(out_dir, branch_file_name(branch.branch_id)), b"".join(data))

    manifest = chain_manifest(chain)
    atomic_write(
        os.path.join(out_dir, MANIFEST_NAME),
        json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"),
    )
    return manifest


def load_manifest(chain_dir: str) -> Dict[str, Any]:
    path = os.path.join(chain_dir, MANIFEST_NAME)
    try:
        with open(path, "rb") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ChainError(f"cannot read manifest {path}: {exc}")
    if manifest.get("version") != FORMAT_VERSION:
        raise ChainError(f"unsupported chain format version: {manifest.get('version')}")
    return manifest


def iter_header_records(
    chain_dir: str, rules: ConsensusRules
) -> Iterator[Tuple[int, bytes, Header]]:
    """
    Stream (height, auth data root, header) records from a chain directory.

    :raises ChainError: on a truncated record, an unexpected height or an
                        unparsable header, naming the offending height.
    """
    header_size = rules.pow_engine.header_size
    record_size = 8 + 32 + header_size
    expected = 0
    with open(os.path.join(chain_dir, HEADERS_NAME), "rb") as f:
        while True:
            record = f.read(record_size)
            if not record:
                break
            if len(record) != record_size:
                raise ChainError("truncated header record", expected)
            height = int.from_bytes(record[:8], "little")
            if height != expected:
                raise ChainError(f"record out of order (found height {height})", expected)
            try:
                header = Header.parse(record[40:], height=height)
            except ValueError as exc:
                raise ChainError(f"corrupt header: {exc}", height)
            yield height, record[8:40], header
            expected += 1


def read_branch_nodes(chain_dir: str, branch_id: int, rules: ConsensusRules) -> List[MmrNode]:
    fmt = rules.mmr_format
    with open(os.path.join(chain_dir, branch_file_name(branch_id)), "rb") as f:
        data = f.read()
    res = []
    offset = 0
    while offset < len(data):
        if offset + 2 > len(data):
            raise ChainError(f"truncated node record in branch {branch_id}")
        size = int.from_bytes(data[offset : offset + 2], "little")
        try:
            res.append(fmt.parse(data[offset + 2 : offset + 2 + size]))
        except ValueError as exc:
            raise ChainError(f"corrupt node {len(res)} in branch {branch_id}: {exc}")
        offset += 2 + size
    return res


def load_chain(chain_dir: str) -> Chain:
    """
    Read a chain written by save_chain.
    """
    manifest = load_manifest(chain_dir)
    rules = ConsensusRules.from_json(manifest["rules"])
    headers = []
    auth_roots = []
    for _, auth_root, header in iter_header_records(chain_dir, rules):
        headers.append(header)
        auth_roots.append(auth_root)
    if len(headers) != manifest["block_count"]:
        raise ChainError(
            f"expected {manifest['block_count']} headers, found {len(headers)}",
            len(headers),
        )

    branches = []
    for info in manifest["branches"]:
        branch_id = info["branch_id"]
        nodes = read_branch_nodes(chain_dir, branch_id, rules)
        start = info["start_height"]
        try:
            mmr = Mmr.from_nodes(rules.mmr_format, nodes, branch_id, start, info["leaf_count"])
        except ValueError as exc:
            raise ChainError(f"branch {branch_id} is corrupt: {exc}")
        branches.append(
            ChainBranch(
                branch_id=branch_id,
                start_height=start,
                headers=headers[start : start + info["block_count"]],
                mmr=mmr,
            )
        )
    return Chain(
        rules=rules,
        branches=branches,
        auth_roots=auth_roots,
        seed=manifest["seed"],
        kind=manifest["kind"],
        fork_info=manifest["fork_info"],
    )
