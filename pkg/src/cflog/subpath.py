"""Sub-path replacement: swap configured address sequences for 1-byte ids.

Matching is leftmost-longest and non-overlapping. Because no pattern may be
a prefix of another, at most one pattern can match at any position, so the
matcher only needs a trie and a small replay buffer.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .model import MAX_SUBPATH_ID, Addr, ModelError, PrefixMark, SubPath, Token, check_address


class SubPathError(ValueError):
    pass


@dataclass(frozen=True)
class SubPathSpec:
    id: int
    pattern: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.id <= MAX_SUBPATH_ID:
            raise SubPathError(f"sub-path id must be in 1..{MAX_SUBPATH_ID}, got {self.id}")
        if len(self.pattern) < 2:
            raise SubPathError(f"sub-path {self.id}: pattern needs at least 2 addresses")
        for a in self.pattern:
            check_address(a)


class _Node:
    __slots__ = ("children", "spec_id")

    def __init__(self) -> None:
        self.children: dict[int, _Node] = {}
        self.spec_id = 0


class Matcher:
    """Immutable compiled pattern set. Use :meth:`session` to encode a stream."""

    def __init__(self, specs: Sequence[SubPathSpec]) -> None:
        self.specs = tuple(sorted(specs, key=lambda s: s.id))
        self.by_id = {s.id: s for s in self.specs}
        self.root = _Node()
        for spec in self.specs:
            node = self.root
            for addr in spec.pattern:
                node = node.children.setdefault(addr, _Node())
            node.spec_id = spec.id

    def session(self) -> MatchSession:
        return MatchSession(self)

    def encode(self, addresses: Iterable[int]) -> list[Token]:
        s = self.session()
        out: list[Token] = []
        for a in addresses:
            out.extend(s.push(a))
        out.extend(s.flush())
        return out


def compile_specs(specs: Sequence[SubPathSpec]) -> Matcher:
    if len(specs) > MAX_SUBPATH_ID:
        raise SubPathError(f"at most {MAX_SUBPATH_ID} sub-paths, got {len(specs)}")
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise SubPathError("duplicate sub-path id")
    for a in specs:
        for b in specs:
            if a is not b and b.pattern[: len(a.pattern)] == a.pattern:
                raise SubPathError(
                    f"pattern of sub-path {a.id} is a prefix of sub-path {b.id}"
                )
    return Matcher(specs)


class MatchSession:
    """Per-stream match state. Emits tokens as soon as they are settled."""

    def __init__(self, matcher: Matcher) -> None:
        self._root = matcher.root
        self._node = matcher.root
        self._buf: list[int] = []

    @property
    def pending(self) -> int:
        return len(self._buf)

    def push(self, addr: int) -> list[Token]:
        out: list[Token] = []
        todo = deque((addr,))
        while todo:
            a = todo.popleft()
            child = self._node.children.get(a)
            if child is not None:
                self._buf.append(a)
                self._node = child
                if child.spec_id:
                    out.append(SubPath(child.spec_id))
                    self._reset()
            elif not self._buf:
                out.append(Addr(a))
            else:
                # no match can start at buf[0]; re-scan everything after it
                head, rest = self._buf[0], self._buf[1:]
                self._reset()
                out.append(Addr(head))
                todo.appendleft(a)
                todo.extendleft(reversed(rest))
        return out

    def flush(self) -> list[Token]:
        """End of stream: partial matches come out as plain addresses."""
        out: list[Token] = []
        while self._buf:
            head, rest = self._buf[0], self._buf[1:]
            self._reset()
            out.append(Addr(head))
            for a in rest:
                out.extend(self.push(a))
        return out

    def _reset(self) -> None:
        self._buf = []
        self._node = self._root


def subpath_encode(matcher: Matcher, addresses: Iterable[int]) -> Iterator[Token]:
    session = matcher.session()
    for a in addresses:
        yield from session.push(a)
    yield from session.flush()


def subpath_decode(specs: Sequence[SubPathSpec] | Matcher, tokens: Iterable[Token]) -> Iterator[Addr]:
    by_id = specs.by_id if isinstance(specs, Matcher) else {s.id: s for s in specs}
    for tok in tokens:
        if isinstance(tok, Addr):
            yield tok
        elif isinstance(tok, SubPath):
            spec = by_id.get(tok.id)
            if spec is None:
                raise SubPathError(f"unknown sub-path id {tok.id}")
            for a in spec.pattern:
                yield Addr(a)
        elif isinstance(tok, PrefixMark):
            raise SubPathError("prefix marker reached the sub-path decoder")
        else:
            raise SubPathError(f"unexpected token {tok!r}")


# --- text format: "subpath <id> <hex32> <hex32> ..." --------------------------


def parse_subpaths(text: str) -> list[SubPathSpec]:
    specs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if line[0] != "subpath" or len(line) < 4:
            raise SubPathError(f"line {lineno}: malformed sub-path line")
        try:
            ident = int(line[1])
            pattern = tuple(int(t, 16) for t in line[2:])
        except ValueError as exc:
            raise SubPathError(f"line {lineno}: {exc}") from None
        if any(not re.fullmatch(r"(0[xX])?[0-9a-fA-F]{1,8}", t) for t in line[2:]):
            raise SubPathError(f"line {lineno}: bad address")
        try:
            specs.append(SubPathSpec(ident, pattern))
        except ModelError as exc:
            raise SubPathError(f"line {lineno}: {exc}") from None
    return specs


def write_subpaths(specs: Sequence[SubPathSpec]) -> str:
    return "".join(
        f"subpath {s.id} " + " ".join(f"{a:08x}" for a in s.pattern) + "\n"
        for s in sorted(specs, key=lambda s: s.id)
    )
