import os

import pytest

from ..chain import ChainError, ConsensusRules, build_honest_chain, save_chain
from ..chain.storage import HEADERS_NAME
from ..mmr import node_count
from .store import STORE_MAGIC, NodeStore, StoreError, sync_store


@pytest.fixture(scope="module")
def chain_dir(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("chain"))
    rules = ConsensusRules(engine="mock-sha", upgrades=(300, 700))
    chain = build_honest_chain(1000, rules, seed=7)
    save_chain(chain, out_dir)
    return out_dir, chain


def test_genesis_only(tmp_path):
    chain = build_honest_chain(1, ConsensusRules(engine="mock-sha"), seed=1)
    save_chain(chain, str(tmp_path / "chain"))
    with sync_store(str(tmp_path / "chain"), str(tmp_path / "nodes.store")) as store:
        assert store.synced
        assert store.node_count(0) == 0
        assert store.meta["leaf_counts"] == [0]
        assert store.meta["block_count"] == 1


def test_single_branch_count(tmp_path):
    chain = build_honest_chain(1000, ConsensusRules(engine="mock-sha"), seed=3)
    save_chain(chain, str(tmp_path / "chain"))
    with sync_store(str(tmp_path / "chain"), str(tmp_path / "nodes.store")) as store:
        assert store.node_count(0) == 2 * 999 - bin(999).count("1")
        assert store.branches() == [0]


@pytest.mark.parametrize("mode", ["during-sync", "post-hoc"])
def test_store_matches_chain(chain_dir, tmp_path, mode: str):
    path, chain = chain_dir
    with sync_store(path, str(tmp_path / "nodes.store"), mode=mode) as store:
        assert store.meta["leaf_counts"] == [300, 400, 299]
        for branch in chain.branches:
            assert store.node_count(branch.branch_id) == node_count(branch.mmr.leaf_count)
            for i in [0, 1, 2, 17, len(branch.mmr.nodes) - 1]:
                assert store.node(branch.branch_id, i) == branch.mmr.nodes[i]
        with pytest.raises(KeyError):
            store.node(0, store.node_count(0))
        with pytest.raises(KeyError):
            store.node(3, 0)


def test_sync_modes_are_byte_identical(chain_dir, tmp_path):
    path, _ = chain_dir
    sync_store(path, str(tmp_path / "a.store"), mode="during-sync").close()
    sync_store(path, str(tmp_path / "b.store"), mode="post-hoc").close()
    with open(tmp_path / "a.store", "rb") as f:
        a = f.read()
    with open(tmp_path / "b.store", "rb") as f:
        b = f.read()
    assert a.startswith(STORE_MAGIC)
    assert a == b


def test_reopen(chain_dir, tmp_path):
    path, chain = chain_dir
    store_path = str(tmp_path / "nodes.store")
    with sync_store(path, store_path) as store:
        meta = store.meta
        expected = [store.node(1, i) for i in range(store.node_count(1))]
    with NodeStore.open(store_path) as store:
        assert store.meta == meta
        assert [store.node(1, i) for i in range(store.node_count(1))] == expected
        with pytest.raises(AssertionError):
            store.append_node(2, store.node_count(2), expected[0])


def test_unsealed_store(tmp_path):
    rules = ConsensusRules(engine="mock-sha")
    chain = build_honest_chain(10, rules, seed=1)
    path = str(tmp_path / "nodes.store")
    store = NodeStore.create(path, rules.mmr_format)
    for i, node in enumerate(chain.branches[0].mmr.nodes):
        store.append_node(0, i, node)
    with pytest.raises(StoreError):
        store.append_node(0, 0, chain.branches[0].mmr.nodes[0])
    store.close()
    with pytest.raises(StoreError):
        NodeStore.open(path)
    with NodeStore.open(path, rules.mmr_format) as reopened:
        assert not reopened.synced
        assert reopened.node(0, 3) == chain.branches[0].mmr.nodes[3]


def test_not_a_store(tmp_path):
    path = tmp_path / "junk.store"
    path.write_bytes(b"hello world")
    with pytest.raises(StoreError):
        NodeStore.open(str(path))
    path.write_bytes(STORE_MAGIC + b"\x01\x00")
    with pytest.raises(StoreError):
        NodeStore.open(str(path))


@pytest.mark.parametrize("mode", ["during-sync", "post-hoc"])
def test_wrong_auth_root(tmp_path, mode: str):
    rules = ConsensusRules(engine="mock-sha")
    chain_path = str(tmp_path / "chain")
    save_chain(build_honest_chain(50, rules, seed=2), chain_path)
    record_size = 8 + 32 + rules.pow_engine.header_size
    headers_path = os.path.join(chain_path, HEADERS_NAME)
    with open(headers_path, "rb") as f:
        data = bytearray(f.read())
    data[30 * record_size + 8] ^= 1
    with open(headers_path, "wb") as f:
        f.write(bytes(data))
    store_path = str(tmp_path / "nodes.store")
    with pytest.raises(ChainError) as info:
        sync_store(chain_path, store_path, mode=mode)
    assert info.value.height == 30
    assert not os.path.exists(store_path)
    assert not os.path.exists(store_path + ".tmp")


def test_truncated_chain(tmp_path):
    rules = ConsensusRules(engine="mock-sha")
    chain_path = str(tmp_path / "chain")
    save_chain(build_honest_chain(20, rules, seed=2), chain_path)
    headers_path = os.path.join(chain_path, HEADERS_NAME)
    with open(headers_path, "rb") as f:
        data = f.read()
    with open(headers_path, "wb") as f:
        f.write(data[:-1])
    with pytest.raises(ChainError) as info:
        sync_store(chain_path, str(tmp_path / "nodes.store"))
    assert info.value.height == 19


def test_unknown_mode(chain_dir, tmp_path):
    with pytest.raises(ValueError):
        sync_store(chain_dir[0], str(tmp_path / "x.store"), mode="lazy")
