import os

import numpy as np
import pytest

from ..chain import (
    ConsensusRules,
    FormatError,
    build_adversarial_fork,
    build_honest_chain,
    save_chain,
)
from ..mmr import leaf_index, peaks
from ..util import ZERO_HASH, work_from_bits
from .service import (
    STORE_NAME,
    ChainNodes,
    NotFoundError,
    ProverService,
    ServiceUnavailableError,
)
from .store import NodeStore

RULES = ConsensusRules(engine="mock-sha")
BLOCK_WORK = work_from_bits(RULES.base_bits)


@pytest.fixture(scope="module")
def chain():
    return build_honest_chain(1000, RULES, seed=11)


@pytest.fixture(scope="module")
def service(chain, tmp_path_factory):
    chain_dir = str(tmp_path_factory.mktemp("chain"))
    save_chain(chain, chain_dir)
    res = ProverService.open(chain_dir)
    yield res
    res.close()


def test_blockchain_info(service):
    info = service.get_blockchain_info()
    assert info.block_count == 1000
    assert info.total_work == 1000 * BLOCK_WORK
    assert info.tip_header == service.get_block_header(999)
    assert service.get_blockchain_info() == info


def test_fork_declares_more_work(chain):
    budget = 10 * BLOCK_WORK
    fork = build_adversarial_fork(chain, 900, budget, 0.1, seed=5)
    honest = ProverService.from_chain(chain).get_blockchain_info()
    lying = ProverService.from_chain(fork).get_blockchain_info()
    assert lying.total_work > honest.total_work


def test_block_headers(service, chain):
    assert service.get_block_header(0).prev_hash == ZERO_HASH
    assert service.get_block_header(0) == chain.header(0)
    for h in [0, 1, 500, 999]:
        assert service.get_block_header(h).height == h
    for h in [-1, 1000]:
        with pytest.raises(NotFoundError):
            service.get_block_header(h)
    with pytest.raises(FormatError):
        service.get_block_header(5, distilled=True)


def test_header_hash_is_committed_leaf(service, chain):
    engine = chain.rules.pow_engine
    for h in [0, 10, 998]:
        leaf = service.get_history_node(0, leaf_index(h))
        assert leaf.commitment == engine.digest(service.get_block_header(h))
        assert leaf.earliest_height == leaf.latest_height == h
        assert leaf.earliest_bits == leaf.latest_bits


def test_history_node_peaks():
    chain = build_honest_chain(256, RULES, seed=4)
    service = ProverService.from_chain(chain)
    mmr = chain.branches[0].mmr
    assert mmr.leaf_count == 255
    spans = peaks(255)
    assert len(spans) == 8
    for span in spans:
        node = service.get_history_node(0, span.index)
        assert node.leaf_span == span.leaf_count
    with pytest.raises(NotFoundError):
        service.get_history_node(0, len(mmr.nodes))
    with pytest.raises(NotFoundError):
        service.get_history_node(1, 0)


def test_history_node_recomputes_from_children(service, chain):
    fmt = chain.rules.mmr_format
    for span in peaks(999):
        if span.height == 0:
            continue
        left, right = span.left(), span.right()
        parent = service.get_history_node(0, span.index)
        recomputed = fmt.combine(
            service.get_history_node(0, left.index), service.get_history_node(0, right.index)
        )
        assert parent == recomputed


def test_auth_data_root(service, chain):
    rules = chain.rules
    assert service.get_auth_data_root(0) == ZERO_HASH
    rng = np.random.default_rng(0)
    for h in rng.integers(1, 1000, size=10):
        h = int(h)
        _, _, leaf_count = rules.committed_range(h)
        root = chain.branches[0].mmr.root(leaf_count)
        commitment = rules.history_commitment(root, service.get_auth_data_root(h))
        assert commitment == service.get_block_header(h).block_commitments
    with pytest.raises(NotFoundError):
        service.get_auth_data_root(1000)


def test_total_work(service, chain):
    assert service.get_total_work(0) == BLOCK_WORK
    assert service.get_total_work(499) == 500 * BLOCK_WORK
    assert service.get_total_work(999) == slow_total_work(chain, 999)
    with pytest.raises(NotFoundError):
        service.get_total_work(1000)


def test_height_with_total_work(service):
    assert service.get_height_with_total_work(0) == 0
    assert service.get_height_with_total_work(BLOCK_WORK * 5 // 2) == 2
    with pytest.raises(NotFoundError):
        service.get_height_with_total_work(1000 * BLOCK_WORK + 1)


def test_height_with_total_work_matches_scan():
    rules = ConsensusRules(engine="mock-sha", schedule="random-walk")
    chain = build_honest_chain(300, rules, seed=9)
    service = ProverService.from_chain(chain)
    rng = np.random.default_rng(1)
    total = chain.total_work()
    for x in [0, 1, total] + [int(v) for v in rng.integers(0, total, size=40)]:
        h = service.get_height_with_total_work(x)
        assert h == slow_height_with_total_work(chain, x)
        assert service.get_total_work(h) >= x
        if h:
            assert service.get_total_work(h - 1) < x


def test_unsynced_store(chain, tmp_path):
    store = NodeStore.create(str(tmp_path / "partial.store"), chain.rules.mmr_format)
    service = ProverService(chain, store)
    with pytest.raises(ServiceUnavailableError):
        service.get_blockchain_info()
    with pytest.raises(ServiceUnavailableError):
        service.get_history_node(0, 0)
    service.close()


def test_open_reuses_store(chain, tmp_path):
    chain_dir = str(tmp_path / "chain")
    save_chain(chain, chain_dir)
    store_path = os.path.join(chain_dir, STORE_NAME)
    first = ProverService.open(chain_dir)
    first.close()
    mtime = os.path.getmtime(store_path)
    second = ProverService.open(chain_dir, mode="post-hoc")
    assert os.path.getmtime(store_path) == mtime
    assert second.get_history_node(0, 5) == chain.branches[0].mmr.nodes[5]
    second.close()

    # A store synced from another chain is replaced.
    other_dir = str(tmp_path / "other")
    save_chain(build_honest_chain(1000, RULES, seed=12), other_dir)
    third = ProverService.open(other_dir, store_path=store_path)
    assert third.get_history_node(0, 5) != chain.branches[0].mmr.nodes[5]
    third.close()


def test_services_agree(service, chain):
    memory = ProverService.from_chain(chain)
    assert memory.get_blockchain_info() == service.get_blockchain_info()
    for index in [0, 7, 100, ChainNodes(chain).node_count(0) - 1]:
        assert memory.get_history_node(0, index) == service.get_history_node(0, index)


def slow_total_work(chain, height: int) -> int:
    return sum(work_from_bits(chain.header(h).bits) for h in range(height + 1))


def slow_height_with_total_work(chain, work: int) -> int:
    total = 0
    for h in range(chain.block_count):
        total += work_from_bits(chain.header(h).bits)
        if total >= work:
            return h
    raise AssertionError("work beyond the tip")
