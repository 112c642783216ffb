"""Authenticated attestation messages.

Wire layout (all integers little-endian)::

    header  := "RSPC" 0x01 msg_type
    REQUEST := header chal:u64 flags:u8 [len:u32 table]
               [len:u32 prefix] [len:u32 subpaths] sigma[32]
    REPORT  := header chal:u64 bit_len:u32 len:u32 cflog h[32]

``sigma`` is HMAC-SHA256 over every request byte before it. ``h`` is
HMAC-SHA256 over ``header chal len:u32 pmem bit_len:u32 len:u32 cflog``.
Transports add their own 4-byte length prefix around each message.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import secrets
import struct
from dataclasses import dataclass, field

from .huffman import HuffmanError, HuffmanTable, deserialize_table, serialize_table
from .prefix import PrefixConfig, PrefixError
from .pipeline import SessionConfig
from .subpath import SubPathError, SubPathSpec, parse_subpaths, write_subpaths

MAGIC = b"RSPC"
VERSION = 0x01
MSG_REQUEST = 0x01
MSG_REPORT = 0x02
TAG_LEN = 32
KEY_LEN = 32
CHAL_MAX = (1 << 64) - 1

FLAG_TABLE = 0x01
FLAG_PREFIX = 0x02
FLAG_SUBPATHS = 0x04
FLAG_CLEAR_TABLE = 0x08
_KNOWN_FLAGS = FLAG_TABLE | FLAG_PREFIX | FLAG_SUBPATHS | FLAG_CLEAR_TABLE

_HEADER = struct.Struct("<4sBB")


class RejectReason(str, enum.Enum):
    BAD_MAC = "BadMac"
    STALE_CHALLENGE = "StaleChallenge"
    MALFORMED_WIRE = "MalformedWire"
    CONFIG_UNUSABLE = "ConfigUnusable"


class Rejected(Exception):
    def __init__(self, reason: RejectReason, detail: str = "") -> None:
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class CounterExhausted(OverflowError):
    pass


@dataclass(frozen=True)
class AttestKey:
    key: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.key) != KEY_LEN:
            raise ValueError(f"attestation key must be {KEY_LEN} bytes")

    @classmethod
    def generate(cls) -> AttestKey:
        return cls(secrets.token_bytes(KEY_LEN))

    @classmethod
    def from_hex(cls, text: str) -> AttestKey:
        return cls(bytes.fromhex(text))

    def mac(self, data: bytes) -> bytes:
        return hmac.new(self.key, data, hashlib.sha256).digest()


# --- speculation carried by requests ------------------------------------------


@dataclass(frozen=True)
class Speculation:
    """Speculation fields of a request; ``None`` means "keep what is configured"."""

    table: HuffmanTable | None = None
    prefix: PrefixConfig | None = None
    specs: tuple[SubPathSpec, ...] | None = None
    clear_table: bool = False

    def merged_into(self, current: Speculation) -> Speculation:
        if self.clear_table:
            table = None
        else:
            table = self.table if self.table is not None else current.table
        return Speculation(
            table=table,
            prefix=self.prefix if self.prefix is not None else current.prefix,
            specs=self.specs if self.specs is not None else current.specs,
        )

    def session_config(self) -> SessionConfig:
        prefix = self.prefix if self.prefix is not None else PrefixConfig()
        specs = tuple(self.specs or ())
        return SessionConfig(
            prefix=prefix,
            table=self.table,
            specs=specs,
            use_subpath=bool(specs),
            use_prefix=prefix.prefix_len > 0,
            use_huffman=self.table is not None,
        )

    @classmethod
    def from_config(cls, config: SessionConfig) -> Speculation:
        """Speculation that reproduces ``config`` exactly on the Prover."""
        return cls(
            table=config.table if config.use_huffman else None,
            prefix=config.prefix,
            specs=config.specs if config.use_subpath else (),
            clear_table=not config.use_huffman,
        )


def _encode_prefix(cfg: PrefixConfig) -> bytes:
    out = bytes([cfg.prefix_len]) + cfg.prefix_marker
    if cfg.subpath_marker is None:
        return out + b"\x00"
    return out + b"\x01" + cfg.subpath_marker


def _decode_prefix(payload: bytes) -> PrefixConfig:
    if not payload:
        raise ValueError("empty prefix field")
    p = payload[0]
    if p > 3:
        raise ValueError("prefix_len out of range")
    w = 4 - p
    if len(payload) < 1 + w + 1:
        raise ValueError("prefix field truncated")
    marker = payload[1 : 1 + w]
    has_sub = payload[1 + w]
    rest = payload[2 + w :]
    if has_sub == 0 and not rest:
        return PrefixConfig(p, marker, None)
    if has_sub == 1 and len(rest) == w:
        return PrefixConfig(p, marker, rest)
    raise ValueError("bad sub-path marker encoding")


def _encode_specs(specs: tuple[SubPathSpec, ...]) -> bytes:
    out = bytearray([len(specs)])
    for s in specs:
        if len(s.pattern) > 255:
            raise ValueError("sub-path pattern longer than 255 addresses")
        out += bytes([s.id, len(s.pattern)])
        for a in s.pattern:
            out += a.to_bytes(4, "big")
    return bytes(out)


def _decode_specs(payload: bytes) -> tuple[SubPathSpec, ...]:
    if not payload:
        raise ValueError("empty sub-path field")
    count = payload[0]
    pos = 1
    specs = []
    for _ in range(count):
        if pos + 2 > len(payload):
            raise ValueError("sub-path field truncated")
        ident, n = payload[pos], payload[pos + 1]
        pos += 2
        end = pos + 4 * n
        if end > len(payload):
            raise ValueError("sub-path pattern truncated")
        pattern = tuple(
            int.from_bytes(payload[i : i + 4], "big") for i in range(pos, end, 4)
        )
        specs.append(SubPathSpec(ident, pattern))
        pos = end
    if pos != len(payload):
        raise ValueError("trailing bytes in sub-path field")
    return tuple(specs)


# --- requests ---------------------------------------------------------------


@dataclass(frozen=True)
class Request:
    chal: int
    speculation: Speculation
    sigma: bytes
    wire: bytes = field(repr=False)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None) -> None:
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise ValueError("message truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def field(self) -> bytes:
        return self.take(self.u32())


def _lp(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def build_request(
    key: AttestKey, chal_prev: int, speculation: Speculation | None = None
) -> tuple[Request, int]:
    """Next request; returns it with the counter value to persist (the new Chal)."""
    if chal_prev >= CHAL_MAX:
        raise CounterExhausted("challenge counter exhausted")
    spec = speculation or Speculation()
    chal = chal_prev + 1
    flags = 0
    body = b""
    if spec.table is not None:
        flags |= FLAG_TABLE
        body += _lp(serialize_table(spec.table))
    if spec.prefix is not None:
        flags |= FLAG_PREFIX
        body += _lp(_encode_prefix(spec.prefix))
    if spec.specs is not None:
        flags |= FLAG_SUBPATHS
        body += _lp(_encode_specs(tuple(spec.specs)))
    if spec.clear_table:
        flags |= FLAG_CLEAR_TABLE
    signed = _HEADER.pack(MAGIC, VERSION, MSG_REQUEST) + struct.pack("<QB", chal, flags) + body
    sigma = key.mac(signed)
    req = Request(chal, spec, sigma, signed + sigma)
    return req, chal


def _check_header(wire: bytes, msg_type: int) -> None:
    if len(wire) < _HEADER.size + TAG_LEN:
        raise Rejected(RejectReason.MALFORMED_WIRE, "message too short")
    magic, version, kind = _HEADER.unpack_from(wire)
    if magic != MAGIC or version != VERSION or kind != msg_type:
        raise Rejected(RejectReason.MALFORMED_WIRE, "bad header")


def verify_request(key: AttestKey, chal_prev: int, wire: bytes) -> Request:
    """Authenticate and parse a request; raises :class:`Rejected`."""
    wire = bytes(wire)
    _check_header(wire, MSG_REQUEST)
    signed, sigma = wire[:-TAG_LEN], wire[-TAG_LEN:]
    if not hmac.compare_digest(key.mac(signed), sigma):
        raise Rejected(RejectReason.BAD_MAC)
    try:
        r = _Reader(signed, _HEADER.size)
        chal = r.u64()
        flags = r.u8()
        if flags & ~_KNOWN_FLAGS or (flags & FLAG_TABLE and flags & FLAG_CLEAR_TABLE):
            raise ValueError("bad flags")
        table = deserialize_table(r.field()) if flags & FLAG_TABLE else None
        prefix = _decode_prefix(r.field()) if flags & FLAG_PREFIX else None
        specs = _decode_specs(r.field()) if flags & FLAG_SUBPATHS else None
        if r.pos != r.end:
            raise ValueError("trailing bytes")
    except (ValueError, HuffmanError, PrefixError, SubPathError) as exc:
        raise Rejected(RejectReason.MALFORMED_WIRE, str(exc)) from None
    if chal <= chal_prev:
        raise Rejected(RejectReason.STALE_CHALLENGE, f"chal {chal} <= {chal_prev}")
    spec = Speculation(table, prefix, specs, bool(flags & FLAG_CLEAR_TABLE))
    return Request(chal, spec, sigma, wire)


# --- JSON form (state and bundle files) ---------------------------------------

def speculation_to_json(spec: Speculation) -> dict:
    out: dict = {}
    if spec.table is not None:
        out["table"] = serialize_table(spec.table).hex()
    if spec.prefix is not None:
        p = spec.prefix
        out["prefix"] = {
            "prefix_len": p.prefix_len,
            "prefix_marker": p.prefix_marker.hex(),
            "subpath_marker": p.subpath_marker.hex() if p.subpath_marker else None,
        }
    if spec.specs is not None:
        out["subpaths"] = write_subpaths(spec.specs)
    if spec.clear_table:
        out["clear_table"] = True
    return out


def speculation_from_json(data: dict) -> Speculation:
    table = deserialize_table(bytes.fromhex(data["table"])) if "table" in data else None
    prefix = None
    if data.get("prefix") is not None:
        p = data["prefix"]
        prefix = PrefixConfig(
            int(p["prefix_len"]),
            bytes.fromhex(p["prefix_marker"]),
            bytes.fromhex(p["subpath_marker"]) if p.get("subpath_marker") else None,
        )
    specs = tuple(parse_subpaths(data["subpaths"])) if "subpaths" in data else None
    return Speculation(table, prefix, specs, bool(data.get("clear_table", False)))


# --- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class Report:
    chal: int
    cflog: bytes
    bit_len: int
    h: bytes
    wire: bytes = field(repr=False)


def report_mac_input(chal: int, pmem: bytes, cflog: bytes, bit_len: int) -> bytes:
    return (
        _HEADER.pack(MAGIC, VERSION, MSG_REPORT)
        + struct.pack("<Q", chal)
        + _lp(bytes(pmem))
        + struct.pack("<I", bit_len)
        + _lp(bytes(cflog))
    )


def build_report(
    key: AttestKey, chal: int, pmem: bytes, cflog: bytes, bit_len: int
) -> Report:
    cflog = bytes(cflog)
    h = key.mac(report_mac_input(chal, pmem, cflog, bit_len))
    wire = (
        _HEADER.pack(MAGIC, VERSION, MSG_REPORT)
        + struct.pack("<QI", chal, bit_len)
        + _lp(cflog)
        + h
    )
    return Report(chal, cflog, bit_len, h, wire)


def parse_report(wire: bytes) -> Report:
    """Structural parse only; does not authenticate."""
    wire = bytes(wire)
    _check_header(wire, MSG_REPORT)
    try:
        r = _Reader(wire, _HEADER.size, len(wire) - TAG_LEN)
        chal = r.u64()
        bit_len = r.u32()
        cflog = r.field()
        if r.pos != r.end:
            raise ValueError("trailing bytes")
        if (bit_len + 7) // 8 != len(cflog):
            raise ValueError("bit length does not match log size")
    except ValueError as exc:
        raise Rejected(RejectReason.MALFORMED_WIRE, str(exc)) from None
    return Report(chal, cflog, bit_len, wire[-TAG_LEN:], wire)


def verify_report(key: AttestKey, chal: int, expected_pmem: bytes, wire: bytes) -> Report:
    """Authenticate a report against the expected challenge and program memory."""
    rep = parse_report(wire)
    expected = key.mac(report_mac_input(chal, expected_pmem, rep.cflog, rep.bit_len))
    if not hmac.compare_digest(expected, rep.h):
        raise Rejected(RejectReason.BAD_MAC)
    if rep.chal != chal:
        raise Rejected(RejectReason.STALE_CHALLENGE, f"report for chal {rep.chal}, expected {chal}")
    return rep
