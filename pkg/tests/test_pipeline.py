import random

import pytest

from cflog.huffman import HuffmanTable, build_table, huffman_encode, lengths_for
from cflog.pipeline import (
    ConfigError,
    Encoder,
    SessionConfig,
    SessionSealed,
    decode_log,
    encode_trace,
    finalize,
    log_branch,
    pre_huffman_bytes,
    session_init,
    verbatim_size,
)
from cflog.prefix import MarkerCollision, PrefixConfig
from cflog.subpath import SubPathSpec

from cases import STAGE_SUBSETS, random_case


@pytest.mark.parametrize("stages", STAGE_SUBSETS, ids=lambda s: "+".join(sorted(s)) or "none")
def test_roundtrip_every_stage_subset(stages):
    rng = random.Random("+".join(sorted(stages)))
    for _ in range(150):
        _, trace, config = random_case(rng, stages)
        data, bit_len = encode_trace(config, trace)
        assert decode_log(config, data, bit_len) == list(trace)


def test_stage_order_subpath_before_prefix_before_huffman():
    spec = SubPathSpec(1, (0x08001000, 0x08001024))
    prefix = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    config = SessionConfig(prefix=prefix, specs=(spec,), use_subpath=True, use_prefix=True)
    trace = [0x08001000, 0x08001024, 0x08001050]
    raw = pre_huffman_bytes(config, trace)
    # sub-path symbol first (no prefix yet), then marker+prefix+suffix
    assert raw == b"\x5a\x5a\x01" + b"\xa5\xa5\x08\x00\x10\x50"
    table = build_table([1] * 256)
    huff = SessionConfig(prefix=prefix, specs=(spec,), table=table, use_subpath=True, use_prefix=True, use_huffman=True)
    data, bit_len = encode_trace(huff, trace)
    s = huffman_encode(table, raw)
    assert (data, bit_len) == (s.data, s.bit_len)


def test_first_branch_emits_marker_prefix_suffix_codes():
    table = HuffmanTable.from_lengths(lengths_for({0xA5: 2, 0x08: 3, 0x24: 3, 0x61: 3, 0x88: 3}))
    config = SessionConfig.build(stages=["prefix", "huffman"], prefix_len=2, table=table)
    enc = session_init(config)
    log_branch(enc, 0x08246188)
    data, bit_len = finalize(enc)
    expect = huffman_encode(table, b"\xa5\xa5\x08\x24\x61\x88")
    assert (data, bit_len) == (expect.data, expect.bit_len)
    assert enc.prefix_act == b"\x08\x24"


def test_incremental_equals_batch():
    rng = random.Random(7)
    for _ in range(50):
        _, trace, config = random_case(rng)
        enc = Encoder(config)
        for d in trace:
            enc.log_branch(d)
        assert enc.entries == len(trace)
        assert enc.finalize() == encode_trace(config, trace)


def test_sealed_session():
    enc = Encoder(SessionConfig())
    enc.log_branch(1)
    enc.finalize()
    with pytest.raises(SessionSealed):
        enc.log_branch(2)
    assert enc.finalize() == (b"\x00\x00\x00\x01", 32)


def test_config_validation():
    with pytest.raises(ConfigError):
        SessionConfig(use_huffman=True)
    with pytest.raises(ConfigError):
        SessionConfig(use_subpath=True, prefix=PrefixConfig(0, None, b"\x5a\x5a\x5a\x5a"))
    with pytest.raises(ConfigError):
        SessionConfig(prefix=PrefixConfig(2), use_prefix=False)
    with pytest.raises(ConfigError):
        SessionConfig.build(stages=["bogus"])
    spec = SubPathSpec(1, (1, 2))
    with pytest.raises(ConfigError):
        SessionConfig(specs=(spec,), use_subpath=True)


def test_baseline_is_verbatim():
    trace = [0x08001000, 0xFFFFFFFF]
    data, bit_len = encode_trace(SessionConfig(), trace)
    assert data == bytes.fromhex("08001000ffffffff") and bit_len == 64
    assert verbatim_size(2) == 8


def test_marker_collision_in_stream():
    config = SessionConfig.build(stages=["prefix"], prefix_len=2)
    with pytest.raises(MarkerCollision):
        encode_trace(config, [0x0800A5A5])


def test_unused_subpath_marker_not_reserved():
    prefix = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    config = SessionConfig(prefix=prefix, use_prefix=True)
    data, bit_len = encode_trace(config, [0x08005A5A])
    assert decode_log(config, data, bit_len) == [0x08005A5A]


def test_decode_rejects_wrong_bit_len_without_huffman():
    with pytest.raises(ConfigError):
        decode_log(SessionConfig(), b"\x00\x00\x00\x01", 31)
