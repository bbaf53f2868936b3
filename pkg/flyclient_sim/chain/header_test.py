from dataclasses import replace

import numpy as np
import pytest

from ..util import MAX_TARGET, ZERO_HASH, bits_to_target
from .header import DistilledHeader, FormatError, Header, make_pow_engine


@pytest.mark.parametrize(
    "kind,size", [("equihash-stub", 1487), ("ethash-stub", 175), ("mock-sha", 143)]
)
def test_header_size(kind: str, size: int):
    engine = make_pow_engine(kind)
    header = make_header(engine)
    data = header.serialize()
    assert len(data) == size == engine.header_size
    assert Header.parse(data, height=header.height) == header
    assert Header.from_json(header.to_json()) == header


def test_header_parse_errors():
    data = make_header(make_pow_engine("equihash-stub")).serialize()
    with pytest.raises(ValueError):
        Header.parse(data[:-1])
    with pytest.raises(ValueError):
        Header.parse(data[:100])


def test_distilled_sizes():
    engine = make_pow_engine("ethash-stub", 1024)
    header = engine.mine(make_header(engine))
    short = engine.distill(header)
    spv = engine.distill(header, with_prev=True)
    assert len(short.serialize()) == 104
    assert len(spv.serialize()) == 136
    assert DistilledHeader.parse(short.serialize(), header.height) == short
    assert DistilledHeader.parse(spv.serialize(), header.height) == spv
    assert DistilledHeader.from_json(spv.to_json()) == spv
    with pytest.raises(ValueError):
        DistilledHeader.parse(spv.serialize()[:-1])


def test_distilled_digest_binds_fields():
    engine = make_pow_engine("ethash-stub", 1024)
    header = engine.mine(make_header(engine))
    distilled = engine.distill(header)
    assert engine.digest(distilled) == engine.digest(header)
    assert engine.check(distilled)
    for name in ["header_hash", "mixhash", "chain_history_root"]:
        value = bytearray(getattr(distilled, name))
        value[0] ^= 1
        tampered = replace(distilled, **{name: bytes(value)})
        assert engine.digest(tampered) != engine.digest(header)
    assert engine.digest(replace(distilled, time=distilled.time + 1)) != engine.digest(
        header
    )


@pytest.mark.parametrize("kind", ["equihash-stub", "mock-sha"])
def test_no_distilled_form(kind: str):
    engine = make_pow_engine(kind)
    header = make_header(engine)
    with pytest.raises(FormatError):
        engine.distill(header)
    eth = make_pow_engine("ethash-stub")
    distilled = eth.distill(make_header(eth))
    with pytest.raises(FormatError):
        engine.digest(distilled)


@pytest.mark.parametrize("kind", ["equihash-stub", "ethash-stub", "mock-sha"])
def test_mine_valid_and_invalid(kind: str):
    engine = make_pow_engine(kind, 1024)
    header = make_header(engine)
    good = engine.mine(header)
    bad = engine.mine(header, valid=False)
    assert engine.check(good)
    assert not engine.check(bad)
    assert engine.mine(header) == good


def test_digest_is_deterministic():
    engine = make_pow_engine("equihash-stub", 1024)
    header = make_header(engine)
    assert engine.digest(header) == engine.digest(replace(header))
    assert engine.digest(header) != engine.digest(replace(header, time=header.time + 1))


def test_effective_target():
    engine = make_pow_engine("mock-sha", 1024)
    assert engine.effective_target(0x1F07FFFF) == bits_to_target(0x1F07FFFF) * 1024
    assert engine.effective_target(0x2100FFFF) == MAX_TARGET


def test_unknown_engine():
    with pytest.raises(ValueError):
        make_pow_engine("scrypt")


def make_header(engine) -> Header:
    rng = np.random.default_rng(42)
    return Header(
        prev_hash=rng.bytes(32),
        merkle_root=rng.bytes(32),
        block_commitments=rng.bytes(32),
        time=1_477_641_435,
        bits=0x1F07FFFF,
        nonce=ZERO_HASH,
        solution=engine.random_solution(rng),
        height=1,
    )


def test_mine_invalid_at_max_target():
    engine = make_pow_engine("mock-sha", 1024)
    header = replace(make_header(engine), bits=0x2100FFFF)
    assert engine.check(engine.mine(header))
    with pytest.raises(ValueError):
        engine.mine(header, valid=False)
