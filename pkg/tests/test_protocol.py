import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cflog.huffman import build_table
from cflog.prefix import PrefixConfig
from cflog.protocol import (
    CHAL_MAX,
    MAGIC,
    TAG_LEN,
    AttestKey,
    CounterExhausted,
    Rejected,
    RejectReason,
    Speculation,
    build_report,
    build_request,
    parse_report,
    report_mac_input,
    speculation_from_json,
    speculation_to_json,
    verify_report,
    verify_request,
)
from cflog.subpath import SubPathSpec

KEY = AttestKey(bytes(range(32)))
OTHER = AttestKey(bytes(32))
FULL = Speculation(
    table=build_table(list(range(256))),
    prefix=PrefixConfig(2, b"\xa5\xa5", b"\x5a\x5a"),
    specs=(SubPathSpec(1, (0x08001000, 0x08001024)), SubPathSpec(2, (1, 2, 3))),
)


def test_key_repr_hides_secret():
    assert bytes(range(32)).hex() not in repr(KEY)
    with pytest.raises(ValueError):
        AttestKey(b"short")
    assert len(AttestKey.generate().key) == 32


@pytest.mark.parametrize(
    "spec",
    [Speculation(), FULL, Speculation(clear_table=True), Speculation(specs=()), Speculation(prefix=PrefixConfig(0))],
)
def test_request_roundtrip(spec):
    req, chal = build_request(KEY, 41, spec)
    assert chal == 42
    assert req.wire[:4] == MAGIC and req.wire[4] == 1 and req.wire[5] == 1
    got = verify_request(KEY, 41, req.wire)
    assert got.chal == 42
    assert got.speculation == spec


def test_request_wire_layout():
    req, _ = build_request(KEY, 0)
    assert len(req.wire) == 6 + 8 + 1 + TAG_LEN
    assert struct.unpack_from("<QB", req.wire, 6) == (1, 0)
    assert req.sigma == KEY.mac(req.wire[:-TAG_LEN])


def test_stale_and_replayed_requests():
    req, chal = build_request(KEY, 5)
    verify_request(KEY, 5, req.wire)
    with pytest.raises(Rejected) as exc:
        verify_request(KEY, chal, req.wire)
    assert exc.value.reason is RejectReason.STALE_CHALLENGE


def test_wrong_key_rejected():
    req, _ = build_request(KEY, 0, FULL)
    with pytest.raises(Rejected) as exc:
        verify_request(OTHER, 0, req.wire)
    assert exc.value.reason is RejectReason.BAD_MAC


def test_counter_exhaustion():
    with pytest.raises(CounterExhausted):
        build_request(KEY, CHAL_MAX)
    req, chal = build_request(KEY, CHAL_MAX - 1)
    assert chal == CHAL_MAX


def test_malformed_but_authentic_request():
    # a correctly MACed body that does not parse is MalformedWire, not BadMac
    body = b"RSPC\x01\x01" + struct.pack("<QB", 1, 0x80)
    wire = body + KEY.mac(body)
    with pytest.raises(Rejected) as exc:
        verify_request(KEY, 0, wire)
    assert exc.value.reason is RejectReason.MALFORMED_WIRE


@pytest.mark.parametrize("wire", [b"", b"RSPC", b"XXXX\x01\x01" + bytes(40), b"RSPC\x02\x01" + bytes(40)])
def test_bad_header(wire):
    with pytest.raises(Rejected) as exc:
        verify_request(KEY, 0, wire)
    assert exc.value.reason is RejectReason.MALFORMED_WIRE


def test_report_roundtrip_and_layout():
    pmem = b"\x00" * 64
    rep = build_report(KEY, 7, pmem, b"\xab\xc0", 10)
    chal, bit_len, n = struct.unpack_from("<QII", rep.wire, 6)
    assert (chal, bit_len, n) == (7, 10, 2)
    assert rep.h == KEY.mac(report_mac_input(7, pmem, b"\xab\xc0", 10))
    got = verify_report(KEY, 7, pmem, rep.wire)
    assert (got.cflog, got.bit_len) == (b"\xab\xc0", 10)
    assert parse_report(rep.wire).chal == 7


def test_report_rejections():
    pmem = b"\x01" * 16
    rep = build_report(KEY, 7, pmem, b"\x00", 8)
    with pytest.raises(Rejected) as exc:
        verify_report(KEY, 7, b"\x02" * 16, rep.wire)
    assert exc.value.reason is RejectReason.BAD_MAC
    with pytest.raises(Rejected) as exc:
        verify_report(KEY, 8, pmem, rep.wire)
    assert exc.value.reason is RejectReason.BAD_MAC
    with pytest.raises(Rejected) as exc:
        verify_report(KEY, 7, pmem, rep.wire[:-1])
    assert exc.value.reason in (RejectReason.BAD_MAC, RejectReason.MALFORMED_WIRE)


def test_bit_len_is_authenticated():
    pmem = b"\x01"
    rep = build_report(KEY, 1, pmem, b"\xff", 8)
    forged = bytearray(rep.wire)
    struct.pack_into("<I", forged, 14, 7)
    with pytest.raises(Rejected):
        verify_report(KEY, 1, pmem, bytes(forged))


@given(st.binary(max_size=200))
@settings(max_examples=200)
def test_random_bytes_never_accepted(blob):
    for fn in (lambda w: verify_request(KEY, 0, w), lambda w: verify_report(KEY, 1, b"", w)):
        with pytest.raises(Rejected):
            fn(blob)


def test_speculation_merge():
    cur = Speculation(table=FULL.table, prefix=FULL.prefix)
    assert Speculation().merged_into(cur) == cur
    cleared = Speculation(clear_table=True).merged_into(cur)
    assert cleared.table is None and cleared.prefix == cur.prefix
    assert Speculation(specs=()).merged_into(Speculation(specs=FULL.specs)).specs == ()


def test_speculation_json_roundtrip():
    for spec in (FULL, Speculation(), Speculation(clear_table=True)):
        assert speculation_from_json(speculation_to_json(spec)) == spec


def test_from_config_reproduces_config():
    config = FULL.session_config()
    assert config.stages == ("subpath", "prefix", "huffman")
    again = Speculation.from_config(config).merged_into(Speculation()).session_config()
    assert again == config
