import numpy as np
import pytest
import requests
from fastapi.testclient import TestClient

from ..chain import ConsensusRules, build_honest_chain
from ..params import VerifierParams
from ..prover import NodeStore, ProverService, create_app
from .handles import HttpProver, LocalProver, ProverError, RecordingProver, TransportError
from .session import VerificationSession, VerifierOptions, check_prover, flyclient_verify

RULES = ConsensusRules(engine="mock-sha", upgrades=(50,))
PARAMS = VerifierParams(c=0.5, L=5, lam=10, n=120, delta=5 / 120, n_det=5, n_prob=20)


@pytest.fixture(scope="module")
def chain():
    return build_honest_chain(120, RULES, seed=2)


@pytest.fixture(scope="module")
def http_prover(chain):
    client = TestClient(create_app(ProverService.from_chain(chain)))
    return HttpProver("http://testserver/", RULES, client=client)


def test_http_answers_match_local(chain, http_prover):
    local = LocalProver(ProverService.from_chain(chain))
    assert http_prover.get_blockchain_info() == local.get_blockchain_info()
    assert http_prover.get_block_header(17) == chain.header(17)
    assert http_prover.get_block_header(17).height == 17
    assert http_prover.get_history_node(1, 3) == local.get_history_node(1, 3)
    assert http_prover.get_auth_data_root(60) == chain.auth_root(60)
    assert http_prover.get_total_work(60) == chain.total_work(60)
    assert http_prover.get_height_with_total_work(chain.total_work(60)) == 60


def test_http_verification(chain, http_prover):
    for options in [VerifierOptions(), VerifierOptions(proof_style="cumulative")]:
        rng = np.random.default_rng(1)
        res = flyclient_verify([http_prover], RULES, PARAMS, options, rng=rng)
        assert res.accepted
        assert res.info.block_count == 120

    local = LocalProver(ProverService.from_chain(chain))
    keys = []
    for p in [http_prover, local]:
        session = VerificationSession(RULES, PARAMS, rng=np.random.default_rng(3))
        assert check_prover(p, p.get_blockchain_info(), session).accepted
        keys.append([(x.kind, x.key) for x in session.transcript])
    assert keys[0] == keys[1]


def test_http_errors(chain, http_prover):
    with pytest.raises(ProverError) as info:
        http_prover.get_block_header(500)
    assert info.value.code == -32004
    with pytest.raises(ProverError):
        http_prover.get_history_node(9, 0)


def test_http_unavailable(chain, tmp_path):
    store = NodeStore.create(str(tmp_path / "nodes.store"), RULES.mmr_format)
    client = TestClient(create_app(ProverService(chain, store)))
    prover = HttpProver("http://testserver/", RULES, client=client)
    with pytest.raises(TransportError):
        prover.get_blockchain_info()
    store.close()


def test_connection_failure():
    client = FakeClient(requests.ConnectionError("refused"))
    prover = HttpProver("http://127.0.0.1:1/", RULES, client=client)
    with pytest.raises(TransportError):
        prover.get_blockchain_info()
    res = flyclient_verify([prover], RULES, PARAMS)
    assert res.transport_only


@pytest.mark.parametrize(
    "body,error",
    [
        (ValueError("not json"), TransportError),
        ([1, 2], TransportError),
        (dict(jsonrpc="2.0", id=1), TransportError),
        (dict(jsonrpc="2.0", id=1, error=dict(code=-32003, message="syncing")), TransportError),
        (dict(jsonrpc="2.0", id=1, error=dict(code=-32004, message="nope")), ProverError),
        (dict(jsonrpc="2.0", id=1, result="zz"), ProverError),
        (dict(jsonrpc="2.0", id=1, result=dict(blocks=3)), ProverError),
    ],
)
def test_bad_responses(body, error):
    prover = HttpProver("http://127.0.0.1:1/", RULES, client=FakeClient(Response(body)))
    with pytest.raises(error):
        prover.get_block_header(3)
    with pytest.raises(error):
        prover.get_blockchain_info()


def test_recording_prover(chain):
    recorder = RecordingProver(LocalProver(ProverService.from_chain(chain), name="honest"))
    assert recorder.name == "honest"
    session = VerificationSession(RULES, PARAMS, rng=np.random.default_rng(0))
    assert check_prover(recorder, recorder.get_blockchain_info(), session).accepted
    assert recorder.info.block_count == 120
    assert set(recorder.headers) == set(session.transcript.keys("header"))
    assert len(recorder.nodes) == session.transcript.count("node")
    assert len(recorder.heights) == len({d.x for d in session.draws})
    assert list(recorder.total_works) == [120 - 6]


class Response:
    def __init__(self, body):
        self.body = body

    def json(self):
        if isinstance(self.body, Exception):
            raise self.body
        return self.body


class FakeClient:
    def __init__(self, response):
        self.response = response

    def post(self, url, json=None, timeout=None):
        if isinstance(self.response, Exception):
            raise self.response
        return self.response
