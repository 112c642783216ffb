import pytest
from hypothesis import given
from hypothesis import strategies as st

from cflog.model import (
    Addr,
    BitStream,
    CfgModel,
    CheckResult,
    ModelError,
    PrefixMark,
    SubPath,
    Trace,
    bitstream_append,
    cfg_check_trace,
    join_address,
    parse_cfg,
    parse_trace,
    split_address,
    write_cfg,
    write_trace,
)

addresses = st.integers(0, 0xFFFFFFFF)

# 7-node CFG with 16-bit-style placement mapped into 32-bit space
FIG_CFG = """\
# seven nodes, two regions
entry e0001000
node e0001000
node e0001010
node e0001020
node e0001030
node f0002000
node f0002010
node e0001040
edge e0001000 e0001010
edge e0001010 e0001020
edge e0001020 e0001010
edge e0001020 f0002000
edge f0002000 f0002010
edge f0002010 e0001030
edge e0001030 e0001040
"""


@given(addresses, st.integers(0, 3))
def test_split_join_roundtrip(addr, p):
    prefix, suffix = split_address(addr, p)
    assert len(prefix) == p and len(suffix) == 4 - p
    assert join_address(prefix, suffix) == addr


def test_split_example():
    assert split_address(0x08246188, 2) == (b"\x08\x24", b"\x61\x88")
    assert split_address(0x08246188, 0) == (b"", b"\x08\x24\x61\x88")


def test_address_range():
    with pytest.raises(ModelError):
        Addr(1 << 32)
    with pytest.raises(ModelError):
        Addr(-1)
    with pytest.raises(ModelError):
        SubPath(0)
    with pytest.raises(ModelError):
        SubPath(9)
    assert PrefixMark(b"\x08\x00").prefix == b"\x08\x00"


def test_bitstream_padding_must_be_zero():
    BitStream(b"\xc0", 2)
    with pytest.raises(ModelError):
        BitStream(b"\xc1", 2)
    with pytest.raises(ModelError):
        BitStream(b"\x00\x00", 3)


@given(st.lists(st.tuples(st.integers(1, 32), st.integers(0, 2**32 - 1)), max_size=40))
def test_bitstream_append_is_concatenation(codes):
    s = BitStream(b"", 0)
    expect = ""
    for length, value in codes:
        value &= (1 << length) - 1
        s = bitstream_append(s, value, length)
        expect += format(value, f"0{length}b")
    assert s.bits() == expect
    assert s.bit_len == len(expect)
    assert len(s.data) == (len(expect) + 7) // 8


def test_fig_cfg_parses_and_path_valid():
    cfg = parse_cfg(FIG_CFG)
    assert len(cfg.nodes) == 7
    path = [0xE0001000, 0xE0001010, 0xE0001020, 0xF0002000, 0xF0002010, 0xE0001030, 0xE0001040]
    assert cfg_check_trace(cfg, Trace(tuple(path))).valid
    assert parse_cfg(write_cfg(cfg)) == cfg


def test_check_trace_violation_index():
    cfg = parse_cfg(FIG_CFG)
    bad = [0xE0001000, 0xE0001010, 0xE0001040]
    assert cfg_check_trace(cfg, bad) == CheckResult(False, 2)
    assert not cfg_check_trace(cfg, [0xF0002000])
    assert cfg_check_trace(cfg, [0xE0001010]).valid  # successor of the entry
    assert cfg_check_trace(cfg, []).valid


@pytest.mark.parametrize(
    "text, msg",
    [
        ("entry 1\nnode 1\nnode 1\n", "duplicate node"),
        ("node 1\n", "missing entry"),
        ("entry 1\nentry 1\nnode 1\n", "duplicate entry"),
        ("entry 1\nnode 123456789\n", "overflow"),
        ("entry 1\nnode 1\nedge 1 2\n", "edge endpoint"),
        ("entry 1\nnode 1\nbogus 3\n", "malformed"),
        ("entry 2\nnode 1\n", "not a node"),
    ],
)
def test_cfg_parse_errors(text, msg):
    with pytest.raises(ModelError, match=msg):
        parse_cfg(text)


def test_trace_text_roundtrip():
    t = Trace((0x08000000, 0xFFFFFFFF, 0))
    assert parse_trace(write_trace(t)) == t
    assert parse_trace("# only a comment\n0x10 # tail\n").destinations == (0x10,)
    with pytest.raises(ModelError):
        parse_trace("1 2\n")


def test_cfg_model_build():
    cfg = CfgModel.build([1, 2], [(1, 2)], 1)
    assert cfg.successors(1) == {2}
    assert cfg.successors(2) == frozenset()
    assert cfg.has_edge(1, 2) and not cfg.has_edge(2, 1)
