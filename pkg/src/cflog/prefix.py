"""Prefix elision for log entries.

Every entry is framed at the suffix width ``w = 4 - prefix_len``::

    entry := suffix | prefix_marker prefix | subpath_marker id

A new prefix is announced with the prefix marker, then only suffixes are
written until the prefix changes. Sub-path symbols go out as the sub-path
marker plus a one-byte id and leave the active prefix alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    ADDRESS_BYTES,
    Addr,
    CfgModel,
    SubPath,
    Token,
    join_address,
    split_address,
)

DEFAULT_PREFIX_FILL = 0xA5
DEFAULT_SUBPATH_FILL = 0x5A


class PrefixError(ValueError):
    pass


class MarkerCollision(PrefixError):
    """A genuine address suffix equals a reserved marker."""

    def __init__(self, address: int, marker: bytes) -> None:
        super().__init__(f"suffix of {address:#010x} collides with marker {marker.hex()}")
        self.address = address
        self.marker = marker


class PrefixDecodeError(PrefixError):
    pass


@dataclass(frozen=True)
class PrefixConfig:
    """``subpath_marker`` is None when no sub-path symbols will be logged."""

    prefix_len: int = 0
    prefix_marker: bytes | None = None
    subpath_marker: bytes | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.prefix_len < ADDRESS_BYTES:
            raise PrefixError(f"prefix_len must be in 0..3, got {self.prefix_len}")
        if self.prefix_marker is None:
            object.__setattr__(
                self, "prefix_marker", bytes([DEFAULT_PREFIX_FILL]) * self.suffix_width
            )
        for name in ("prefix_marker", "subpath_marker"):
            m = getattr(self, name)
            if m is not None and len(m) != self.suffix_width:
                raise PrefixError(
                    f"{name} must be {self.suffix_width} bytes, got {len(m)}"
                )
        if self.subpath_marker is not None and self.subpath_marker == self.prefix_marker:
            raise PrefixError("prefix and sub-path markers must differ")

    @classmethod
    def with_defaults(cls, prefix_len: int, subpaths: bool = False) -> PrefixConfig:
        w = ADDRESS_BYTES - prefix_len
        return cls(
            prefix_len,
            bytes([DEFAULT_PREFIX_FILL]) * w,
            bytes([DEFAULT_SUBPATH_FILL]) * w if subpaths else None,
        )

    @property
    def suffix_width(self) -> int:
        return ADDRESS_BYTES - self.prefix_len

    def reserved(self) -> tuple[bytes, ...]:
        """Markers a genuine suffix must never equal under this config."""
        out = []
        if self.prefix_len:
            out.append(self.prefix_marker)
        if self.subpath_marker is not None:
            out.append(self.subpath_marker)
        return tuple(out)


@dataclass
class PrefixState:
    prefix_act: bytes | None = None


def prefix_encode_step(cfg: PrefixConfig, state: PrefixState, token: Token) -> bytes:
    """Encode one token, updating ``state`` in place; returns the emitted bytes."""
    if isinstance(token, Addr):
        prefix, suffix = split_address(token.value, cfg.prefix_len)
        if suffix in cfg.reserved():
            raise MarkerCollision(token.value, suffix)
        if not cfg.prefix_len or prefix == state.prefix_act:
            return suffix
        state.prefix_act = prefix
        return cfg.prefix_marker + prefix + suffix
    if isinstance(token, SubPath):
        if cfg.subpath_marker is None:
            raise PrefixError("sub-path token but no sub-path marker configured")
        return cfg.subpath_marker + bytes([token.id])
    raise PrefixError(f"prefix encoder cannot consume {token!r}")


def prefix_encode(cfg: PrefixConfig, tokens: Iterable[Token]) -> bytes:
    state = PrefixState()
    return b"".join(prefix_encode_step(cfg, state, t) for t in tokens)


def prefix_decode(cfg: PrefixConfig, data: bytes) -> list[Token]:
    w = cfg.suffix_width
    p = cfg.prefix_len
    out: list[Token] = []
    active: bytes | None = None
    pos = 0
    n = len(data)
    while pos < n:
        if pos + w > n:
            raise PrefixDecodeError(f"truncated entry at byte {pos}")
        chunk = bytes(data[pos : pos + w])
        pos += w
        if p and chunk == cfg.prefix_marker:
            if pos + p > n:
                raise PrefixDecodeError(f"truncated prefix at byte {pos}")
            active = bytes(data[pos : pos + p])
            pos += p
        elif cfg.subpath_marker is not None and chunk == cfg.subpath_marker:
            if pos >= n:
                raise PrefixDecodeError(f"truncated sub-path id at byte {pos}")
            try:
                out.append(SubPath(data[pos]))
            except ValueError as exc:
                raise PrefixDecodeError(str(exc)) from None
            pos += 1
        else:
            if p and active is None:
                raise PrefixDecodeError("suffix before any prefix was established")
            out.append(Addr(join_address(active or b"", chunk)))
    return out


def encoded_size(prefix_len: int, addresses: Sequence[int]) -> int:
    """Closed-form byte count of prefix-encoding plain addresses."""
    w = ADDRESS_BYTES - prefix_len
    if not prefix_len:
        return w * len(addresses)
    size = 0
    active = None
    for a in addresses:
        top = a >> (8 * w)
        size += w if top == active else 2 * w + prefix_len
        active = top
    return size


def check_marker_collision(cfg: PrefixConfig, cfgm: CfgModel) -> list[int]:
    """Node addresses whose suffix equals a reserved marker (empty means safe)."""
    reserved = cfg.reserved()
    return sorted(
        n for n in cfgm.nodes if split_address(n, cfg.prefix_len)[1] in reserved
    )


def choose_markers(
    prefix_len: int, addresses: Iterable[int], subpaths: bool = False
) -> PrefixConfig:
    """Default markers if they are unused by ``addresses``, else the first free ones.

    Candidates are repeated-byte patterns first, then every suffix value in
    ascending order.
    """
    w = ADDRESS_BYTES - prefix_len
    used = {split_address(a, prefix_len)[1] for a in addresses}
    wanted = 2 if subpaths and prefix_len else 1
    preferred = [DEFAULT_PREFIX_FILL, DEFAULT_SUBPATH_FILL] if prefix_len else [DEFAULT_SUBPATH_FILL]

    def candidates():
        for fill in preferred:
            yield bytes([fill]) * w
        for fill in range(256):
            yield bytes([fill]) * w
        for v in range(1 << (8 * w)):
            yield v.to_bytes(w, "big")

    picked: list[bytes] = []
    for c in candidates():
        if c not in used and c not in picked:
            picked.append(c)
            if len(picked) == wanted:
                break
    else:
        raise PrefixError("no free suffix value left for a marker")
    if not prefix_len:
        if not subpaths:
            return PrefixConfig(0)
        clash = picked[0] == bytes([DEFAULT_PREFIX_FILL]) * w
        return PrefixConfig(0, bytes(w) if clash else None, picked[0])
    return PrefixConfig(prefix_len, picked[0], picked[1] if subpaths else None)
