import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cflog.model import Addr, CfgModel, PrefixMark, SubPath
from cflog.prefix import (
    MarkerCollision,
    PrefixConfig,
    PrefixDecodeError,
    PrefixError,
    PrefixState,
    check_marker_collision,
    choose_markers,
    encoded_size,
    prefix_decode,
    prefix_encode,
    prefix_encode_step,
)

from oracles import prefix_log_size

addresses = st.integers(0, 0xFFFFFFFF)


def test_suffix_only_when_prefix_matches():
    cfg = PrefixConfig(2)
    state = PrefixState(prefix_act=b"\x08\x24")
    assert prefix_encode_step(cfg, state, Addr(0x08246188)) == b"\x61\x88"
    assert state.prefix_act == b"\x08\x24"


def test_first_entry_logs_marker_prefix_suffix():
    cfg = PrefixConfig(2, b"\x33\x33")
    state = PrefixState()
    assert state.prefix_act is None
    assert prefix_encode_step(cfg, state, Addr(0xE0001000)) == b"\x33\x33\xe0\x00\x10\x00"
    assert state.prefix_act == b"\xe0\x00"


def test_subpath_symbol_keeps_prefix_act():
    cfg = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    state = PrefixState(prefix_act=b"\x08\x00")
    assert prefix_encode_step(cfg, state, SubPath(3)) == b"\x5a\x5a\x03"
    assert state.prefix_act == b"\x08\x00"


def test_prefix_len_zero_is_verbatim():
    cfg = PrefixConfig(0)
    data = prefix_encode(cfg, [Addr(0x01020304), Addr(0xA5A5A5A5)])
    assert data == bytes.fromhex("01020304a5a5a5a5")


def test_marker_collision_raised():
    cfg = PrefixConfig(2)
    with pytest.raises(MarkerCollision) as exc:
        prefix_encode(cfg, [Addr(0x0800A5A5)])
    assert exc.value.address == 0x0800A5A5
    sub = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    with pytest.raises(MarkerCollision):
        prefix_encode(sub, [Addr(0x08005A5A)])
    # without a sub-path marker the 0x5a5a suffix is an ordinary address
    assert prefix_encode(PrefixConfig(2), [Addr(0x08005A5A)])[-2:] == b"\x5a\x5a"


def test_config_validation():
    with pytest.raises(PrefixError):
        PrefixConfig(4)
    with pytest.raises(PrefixError):
        PrefixConfig(2, b"\x33")
    with pytest.raises(PrefixError):
        PrefixConfig(2, b"\x33\x33", b"\x33\x33")
    assert PrefixConfig(1).prefix_marker == b"\xa5\xa5\xa5"
    assert PrefixConfig.with_defaults(2, subpaths=True).subpath_marker == b"\x5a\x5a"


@st.composite
def configs(draw):
    p = draw(st.integers(0, 3))
    sub = draw(st.booleans())
    return PrefixConfig.with_defaults(p, subpaths=sub) if p or sub else PrefixConfig(0)


@given(configs(), st.lists(st.one_of(addresses.map(Addr), st.integers(1, 8).map(SubPath)), max_size=60))
@settings(max_examples=300, deadline=None)
def test_roundtrip(cfg, tokens):
    if cfg.subpath_marker is None:
        tokens = [t for t in tokens if isinstance(t, Addr)]
    reserved = cfg.reserved()
    w = cfg.suffix_width
    tokens = [
        t for t in tokens
        if not isinstance(t, Addr) or t.value.to_bytes(4, "big")[4 - w :] not in reserved
    ]
    data = prefix_encode(cfg, tokens)
    assert prefix_decode(cfg, data) == tokens


@given(st.integers(0, 3), st.lists(addresses, max_size=80))
@settings(max_examples=200, deadline=None)
def test_size_formula_matches_oracle(p, addrs):
    cfg = choose_markers(p, addrs)
    data = prefix_encode(cfg, [Addr(a) for a in addrs])
    assert len(data) == encoded_size(p, addrs) == prefix_log_size(addrs, p)


@given(st.lists(st.integers(0, 0xFFFF), min_size=1, max_size=200))
def test_single_prefix_never_halves_or_better(suffixes):
    addrs = [0x08000000 | s for s in suffixes]
    assume(all(s != 0xA5A5 for s in suffixes))
    size = encoded_size(2, addrs)
    assert size == 2 * len(addrs) + 4
    assert 4 * len(addrs) - size < 2 * len(addrs)


@pytest.mark.parametrize(
    "data",
    [
        b"\x00",  # truncated entry
        b"\xa5\xa5\x08",  # truncated prefix
        b"\x5a\x5a",  # truncated id
        b"\x10\x00",  # suffix before any prefix
    ],
)
def test_decode_errors(data):
    cfg = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    with pytest.raises(PrefixDecodeError):
        prefix_decode(cfg, data)


def test_decode_rejects_bad_subpath_id():
    cfg = PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a")
    with pytest.raises(PrefixDecodeError):
        prefix_decode(cfg, b"\x5a\x5a\x09")


def test_check_marker_collision_on_cfg():
    cfg = CfgModel.build([0xE0001000, 0xE0003333, 0xF0002000], [], 0xE0001000)
    assert check_marker_collision(PrefixConfig(2, b"\x33\x33"), cfg) == [0xE0003333]
    assert check_marker_collision(PrefixConfig(2, b"\x44\x44"), cfg) == []


@given(st.integers(0, 3), st.lists(addresses, max_size=50), st.booleans())
@settings(deadline=None)
def test_choose_markers_avoids_addresses(p, addrs, sub):
    cfg = choose_markers(p, addrs, subpaths=sub)
    w = 4 - p
    reserved = cfg.reserved()
    assert all(a.to_bytes(4, "big")[4 - w :] not in reserved for a in addrs)
    assert (cfg.subpath_marker is not None) == sub


def test_choose_markers_skips_taken_default():
    cfg = choose_markers(2, [0x0800A5A5])
    assert cfg.prefix_marker != b"\xa5\xa5"


def test_decode_yields_addresses_only():
    cfg = PrefixConfig(2, b"\x33\x33")
    toks = prefix_decode(cfg, b"\x33\x33\xe0\x00\x10\x00")
    assert toks == [Addr(0xE0001000)]
    assert not any(isinstance(t, PrefixMark) for t in toks)
