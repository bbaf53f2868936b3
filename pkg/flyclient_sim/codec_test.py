import gzip
import json
from collections import namedtuple

import pytest

from .chain import ConsensusRules, FormatError, build_honest_chain
from .codec import (
    DecodeError,
    Encoding,
    decode,
    encode,
    encode_item,
    gas_estimate,
    measure_transcript,
    pack_ni_file,
    unpack_ni_file,
)

Item = namedtuple("Item", ["kind", "payload"])
Info = namedtuple("Info", ["block_count", "total_work", "tip_header"])

ZCASH = ConsensusRules(upgrades=(20,))
ETHASH = ConsensusRules(engine="ethash-stub", node_format="distilled")


@pytest.fixture(scope="module")
def zcash_chain():
    return build_honest_chain(40, ZCASH, seed=3)


@pytest.fixture(scope="module")
def ethash_chain():
    return build_honest_chain(40, ETHASH, seed=3)


def test_header_sizes(zcash_chain, ethash_chain):
    binary = Encoding()
    distilled = Encoding(format="distilled")
    assert len(encode(zcash_chain.header(5), binary, ZCASH)) == 1487
    assert len(encode(ethash_chain.header(5), binary, ETHASH)) == 175
    assert len(encode(ethash_chain.header(5), distilled, ETHASH)) == 104
    node = ethash_chain.branches[0].mmr.nodes[10]
    assert len(encode(node, distilled, ETHASH)) == 140
    for node in zcash_chain.branches[1].mmr.nodes:
        assert 212 <= len(encode(node, binary, ZCASH)) <= 244


@pytest.mark.parametrize("representation", ["json", "binary", "zipped"])
def test_decode_inverts_encode(zcash_chain, ethash_chain, representation: str):
    enc = Encoding(representation=representation)
    for chain, rules in [(zcash_chain, ZCASH), (ethash_chain, ETHASH)]:
        header = chain.header(17)
        decoded = decode(encode(header, enc, rules), "header", enc, rules, height=17)
        assert decoded == header
        assert decoded.height == 17
        node = chain.branches[0].mmr.nodes[6]
        assert decode(encode(node, enc, rules), "node", enc, rules) == node

    enc = Encoding(representation=representation, format="distilled")
    distilled = ETHASH.pow_engine.distill(ethash_chain.header(9))
    data = encode(ethash_chain.header(9), enc, ETHASH)
    assert decode(data, "header", enc, ETHASH, height=9) == distilled


def test_zipped_is_plain_gzip(zcash_chain):
    header = zcash_chain.header(3)
    data = encode(header, Encoding(representation="zipped"), ZCASH)
    assert gzip.decompress(data) == header.serialize()


def test_encode_is_deterministic(zcash_chain):
    for representation in ["json", "binary", "zipped"]:
        enc = Encoding(representation=representation)
        assert encode(zcash_chain.header(8), enc, ZCASH) == encode(
            zcash_chain.header(8), enc, ZCASH
        )


def test_distilled_format_errors(zcash_chain, ethash_chain):
    distilled = Encoding(format="distilled")
    with pytest.raises(FormatError):
        encode(zcash_chain.header(2), distilled, ZCASH)
    with pytest.raises(FormatError):
        encode(zcash_chain.branches[0].mmr.nodes[0], distilled, ZCASH)
    short = ETHASH.pow_engine.distill(ethash_chain.header(2))
    with pytest.raises(FormatError):
        encode(short, Encoding(), ETHASH)


def test_json_field_names(zcash_chain):
    obj = json.loads(encode(zcash_chain.header(4), Encoding(representation="json"), ZCASH))
    assert obj["height"] == 4
    assert obj["previousblockhash"] == zcash_chain.block_hash(3).hex()
    assert len(obj["solution"]) == 2 * 1344


def test_decode_errors():
    enc = Encoding(representation="zipped")
    with pytest.raises(DecodeError):
        decode(b"not gzip", "header", enc, ZCASH)
    with pytest.raises(DecodeError):
        decode(b"\x00" * 100, "header", Encoding(), ZCASH)
    with pytest.raises(DecodeError):
        decode(b"{}", "node", Encoding(representation="json"), ZCASH)


def test_encoding_validation():
    with pytest.raises(ValueError):
        Encoding(representation="xml")
    with pytest.raises(ValueError):
        Encoding(scope="everything")
    with pytest.raises(ValueError):
        Encoding(format="tiny")
    for rep in ["json", "binary", "zipped"]:
        for fmt in ["normal", "distilled"]:
            enc = Encoding(representation=rep, format=fmt, scope="whole-proof")
            assert Encoding.from_tag(enc.tag) == enc
    with pytest.raises(DecodeError):
        Encoding.from_tag(0x03)
    with pytest.raises(DecodeError):
        Encoding.from_tag(0x20)


def test_measure_empty():
    for rep in ["json", "binary", "zipped"]:
        for scope in ["per-item", "whole-proof"]:
            enc = Encoding(representation=rep, scope=scope)
            assert measure_transcript([], enc, ZCASH) == 0


def test_measure_headers_only(zcash_chain):
    items = [Item("header", zcash_chain.header(h)) for h in range(12)]
    assert measure_transcript(items, Encoding(), ZCASH) == 12 * 1487


def transcript_items(chain, rules):
    info = Info(chain.block_count, chain.total_work(), chain.tip)
    res = [Item("info", info)]
    for h in range(25, 39):
        res.append(Item("header", chain.header(h)))
        res.append(Item("auth_root", chain.auth_root(h)))
    for node in chain.branches[1].mmr.nodes[:12]:
        res.append(Item("node", node))
    res.append(Item("work", chain.total_work(24)))
    res.append(Item("height", 31))
    return res


def test_measure_ordering(zcash_chain):
    items = transcript_items(zcash_chain, ZCASH)
    sizes = {
        rep: measure_transcript(items, Encoding(representation=rep), ZCASH)
        for rep in ["json", "binary", "zipped"]
    }
    assert sizes["json"] > sizes["binary"] > sizes["zipped"]


def test_whole_proof_gzip_beats_piecewise(zcash_chain):
    items = transcript_items(zcash_chain, ZCASH)
    piecewise = measure_transcript(items, Encoding(representation="zipped"), ZCASH)
    whole = measure_transcript(
        items, Encoding(representation="zipped", scope="whole-proof"), ZCASH
    )
    assert whole <= piecewise


def test_measure_distilled(ethash_chain):
    items = [Item("header", ethash_chain.header(h)) for h in range(5)]
    items.append(Item("node", ethash_chain.branches[0].mmr.nodes[3]))
    enc = Encoding(format="distilled")
    assert measure_transcript(items, enc, ETHASH) == 5 * 104 + 140


def test_item_sizes(zcash_chain):
    enc = Encoding()
    assert len(encode_item("auth_root", zcash_chain.auth_root(3), enc, ZCASH)) == 32
    assert len(encode_item("work", 12345, enc, ZCASH)) == 32
    assert len(encode_item("height", 12345, enc, ZCASH)) == 8
    info = Info(40, zcash_chain.total_work(), zcash_chain.tip)
    assert len(encode_item("info", info, enc, ZCASH)) == 8 + 32 + 1487
    with pytest.raises(ValueError):
        encode_item("block", b"", enc, ZCASH)


@pytest.mark.parametrize(
    "size,gas,cost",
    [(1258291, 50_331_640, 13.21), (327680, 13_107_200, 3.44), (0, 0, 0.0)],
)
def test_gas_estimate_sizes(size: int, gas: int, cost: float):
    res = gas_estimate(size)
    assert res.gas == gas
    assert res.cost == pytest.approx(cost, abs=0.01)
    assert res.approximate


def test_gas_estimate_bytes():
    data = bytes([0, 1, 2, 0, 0, 255, 7])
    res = gas_estimate(data)
    assert res.gas == 40 * slow_nonzero(data)
    assert not res.approximate
    assert gas_estimate(bytes(1000)).gas == 0
    assert gas_estimate(data * 3).gas == 3 * res.gas
    assert gas_estimate(100, gas_price_gwei=1.0, token_price=1000.0).cost == pytest.approx(
        4000 * 1e-9 * 1000
    )


@pytest.mark.parametrize("representation", ["json", "binary", "zipped"])
def test_ni_file_framing(representation: str):
    enc = Encoding(representation=representation, scope="whole-proof")
    body = b"some proof body" * 20
    digest = bytes(range(32))
    data = pack_ni_file(body, enc, digest)
    unpacked = unpack_ni_file(data)
    assert unpacked.encoding == enc
    assert unpacked.manifest_digest == digest
    assert unpacked.body == body
    if representation == "zipped":
        assert len(data) < len(body)


def test_ni_file_errors():
    enc = Encoding(scope="whole-proof")
    data = pack_ni_file(b"body", enc, bytes(32))
    with pytest.raises(DecodeError):
        unpack_ni_file(b"FLYNI")
    with pytest.raises(DecodeError):
        unpack_ni_file(b"XX" + data[2:])
    with pytest.raises(DecodeError):
        unpack_ni_file(data[:6] + b"\x09" + data[7:])
    zipped = pack_ni_file(b"body", Encoding(representation="zipped"), bytes(32))
    with pytest.raises(DecodeError):
        unpack_ni_file(zipped[:-4])


def slow_nonzero(data: bytes) -> int:
    return sum(1 for b in data if b != 0)
