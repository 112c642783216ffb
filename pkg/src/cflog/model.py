"""Core data types: addresses, log tokens, bit streams, CFGs and traces.

Addresses are 32-bit unsigned ints. When split into prefix and suffix they
are viewed big-endian, so the prefix is the leading hex digits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

ADDRESS_BYTES = 4
ADDRESS_MAX = 0xFFFFFFFF
MAX_SUBPATH_ID = 8


class ModelError(ValueError):
    """Malformed model input (bad file line, invalid value, broken invariant)."""


def check_address(value: int) -> int:
    if not isinstance(value, int) or not 0 <= value <= ADDRESS_MAX:
        raise ModelError(f"address out of 32-bit range: {value!r}")
    return value


def address_bytes(addr: int) -> bytes:
    return addr.to_bytes(ADDRESS_BYTES, "big")


def split_address(addr: int, prefix_len: int) -> tuple[bytes, bytes]:
    """Return ``(prefix, suffix)`` with ``prefix`` the top ``prefix_len`` bytes."""
    if not 0 <= prefix_len < ADDRESS_BYTES:
        raise ModelError(f"prefix_len must be in 0..3, got {prefix_len}")
    raw = address_bytes(addr)
    return raw[:prefix_len], raw[prefix_len:]


def join_address(prefix: bytes, suffix: bytes) -> int:
    if len(prefix) + len(suffix) != ADDRESS_BYTES:
        raise ModelError("prefix and suffix must add up to 4 bytes")
    return int.from_bytes(prefix + suffix, "big")


# --- tokens -----------------------------------------------------------------


@dataclass(frozen=True)
class Addr:
    value: int

    def __post_init__(self) -> None:
        check_address(self.value)


@dataclass(frozen=True)
class PrefixMark:
    prefix: bytes


@dataclass(frozen=True)
class SubPath:
    id: int

    def __post_init__(self) -> None:
        if not 1 <= self.id <= MAX_SUBPATH_ID:
            raise ModelError(f"sub-path id must be in 1..{MAX_SUBPATH_ID}, got {self.id}")


Token = Union[Addr, PrefixMark, SubPath]


def addr_tokens(addresses: Iterable[int]) -> list[Addr]:
    return [Addr(a) for a in addresses]


# --- bit streams ------------------------------------------------------------


@dataclass(frozen=True)
class BitStream:
    """Immutable MSB-first bit buffer; padding bits in the last byte are zero."""

    data: bytes = b""
    bit_len: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.bit_len <= 0xFFFFFFFF:
            raise ModelError("bit_len must fit in 32 bits")
        if (self.bit_len + 7) // 8 != len(self.data):
            raise ModelError(
                f"bit_len {self.bit_len} inconsistent with {len(self.data)} bytes"
            )
        spare = len(self.data) * 8 - self.bit_len
        if spare and self.data[-1] & ((1 << spare) - 1):
            raise ModelError("non-zero padding bits after bit_len")

    def bits(self) -> str:
        """The valid bits as a '0'/'1' string (debugging and tests)."""
        if not self.data:
            return ""
        return format(int.from_bytes(self.data, "big"), f"0{len(self.data) * 8}b")[
            : self.bit_len
        ]


def bitstream_append(stream: BitStream, code_bits: int, code_len: int) -> BitStream:
    """Return ``stream`` extended by the low ``code_len`` bits of ``code_bits``."""
    if not 1 <= code_len <= 32:
        raise ModelError(f"code_len must be in 1..32, got {code_len}")
    if code_bits < 0 or code_bits >> code_len:
        raise ModelError("code_bits does not fit in code_len bits")
    total = stream.bit_len + code_len
    nbytes = (total + 7) // 8
    acc = int.from_bytes(stream.data, "big") >> (len(stream.data) * 8 - stream.bit_len)
    acc = (acc << code_len) | code_bits
    acc <<= nbytes * 8 - total
    return BitStream(acc.to_bytes(nbytes, "big"), total)


# --- control-flow graphs and traces -------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """Outcome of checking a trace against a CFG."""

    valid: bool
    violation_index: int | None = None

    def __bool__(self) -> bool:
        return self.valid


@dataclass(frozen=True)
class CfgModel:
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]
    entry: int
    _succ: dict[int, frozenset[int]] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        for n in self.nodes:
            check_address(n)
        if self.entry not in self.nodes:
            raise ModelError(f"entry {self.entry:#010x} is not a node")
        succ: dict[int, set[int]] = {}
        for src, dst in self.edges:
            if src not in self.nodes or dst not in self.nodes:
                raise ModelError(f"edge endpoint missing: {src:#010x} -> {dst:#010x}")
            succ.setdefault(src, set()).add(dst)
        object.__setattr__(
            self, "_succ", {k: frozenset(v) for k, v in succ.items()}
        )

    @classmethod
    def build(
        cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]], entry: int
    ) -> CfgModel:
        return cls(frozenset(nodes), frozenset(edges), entry)

    def successors(self, node: int) -> frozenset[int]:
        return self._succ.get(node, frozenset())

    def has_edge(self, src: int, dst: int) -> bool:
        return dst in self._succ.get(src, ())


@dataclass(frozen=True)
class Trace:
    """Branch destinations in execution order.

    ``attack`` marks traces built on purpose to leave the CFG; ordinary traces
    are expected to conform to the CFG they were generated from.
    """

    destinations: tuple[int, ...]
    attack: bool = False

    def __post_init__(self) -> None:
        for d in self.destinations:
            check_address(d)

    def __len__(self) -> int:
        return len(self.destinations)

    def __iter__(self):
        return iter(self.destinations)


def cfg_check_trace(cfg: CfgModel, trace: Trace | Sequence[int]) -> CheckResult:
    """Check that a trace is a walk of ``cfg`` starting at (or right after) the entry.

    The first destination must be the entry itself or a successor of it;
    every later destination must be a successor of the one before.
    """
    dests = trace.destinations if isinstance(trace, Trace) else tuple(trace)
    if not dests:
        return CheckResult(True)
    first = dests[0]
    if first != cfg.entry and not cfg.has_edge(cfg.entry, first):
        return CheckResult(False, 0)
    for i in range(1, len(dests)):
        if not cfg.has_edge(dests[i - 1], dests[i]):
            return CheckResult(False, i)
    return CheckResult(True)


# --- text formats -----------------------------------------------------------

_HEX32 = re.compile(r"^(?:0[xX])?[0-9a-fA-F]{1,8}$")


def _parse_hex(tok: str, lineno: int) -> int:
    if not _HEX32.match(tok):
        if re.match(r"^(?:0[xX])?[0-9a-fA-F]+$", tok):
            raise ModelError(f"line {lineno}: address overflow: {tok}")
        raise ModelError(f"line {lineno}: bad hex address: {tok}")
    return int(tok, 16)


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_cfg(text: str) -> CfgModel:
    nodes: list[int] = []
    seen: set[int] = set()
    edges: list[tuple[int, int]] = []
    entry: int | None = None
    for lineno, parts in _content_lines(text):
        kind, args = parts[0], parts[1:]
        if kind == "node" and len(args) == 1:
            n = _parse_hex(args[0], lineno)
            if n in seen:
                raise ModelError(f"line {lineno}: duplicate node {n:#010x}")
            seen.add(n)
            nodes.append(n)
        elif kind == "edge" and len(args) == 2:
            edges.append((_parse_hex(args[0], lineno), _parse_hex(args[1], lineno)))
        elif kind == "entry" and len(args) == 1:
            if entry is not None:
                raise ModelError(f"line {lineno}: duplicate entry")
            entry = _parse_hex(args[0], lineno)
        else:
            raise ModelError(f"line {lineno}: malformed line: {' '.join(parts)}")
    if entry is None:
        raise ModelError("missing entry line")
    return CfgModel.build(nodes, edges, entry)


def write_cfg(cfg: CfgModel) -> str:
    lines = [f"entry {cfg.entry:08x}"]
    lines += [f"node {n:08x}" for n in sorted(cfg.nodes)]
    lines += [f"edge {a:08x} {b:08x}" for a, b in sorted(cfg.edges)]
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> Trace:
    dests = []
    for lineno, parts in _content_lines(text):
        if len(parts) != 1:
            raise ModelError(f"line {lineno}: expected one address per line")
        dests.append(_parse_hex(parts[0], lineno))
    return Trace(tuple(dests))


def write_trace(trace: Trace | Sequence[int]) -> str:
    return "".join(f"{d:08x}\n" for d in trace)
