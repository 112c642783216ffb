"""Canonical Huffman coding over the 256 byte values.

The Verifier builds a table from byte frequencies of earlier logs; the
Prover only looks codewords up. Tables are canonical, so the 256 code
lengths determine every codeword.
"""

from __future__ import annotations

import heapq
from array import array
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

from ._accel import BitWriter, decode_canonical
from .model import BitStream

ALPHABET = 256
MAX_CODE_LEN = 32


class HuffmanError(ValueError):
    pass


class TruncatedCode(HuffmanError):
    """The bit stream ends in the middle of a codeword."""


class TableFormatError(HuffmanError):
    """A serialized table is truncated, oversized or internally inconsistent."""


def code_lengths(weights: Sequence[int]) -> list[int]:
    """Optimal prefix-code lengths for ``weights`` (any alphabet size >= 1).

    Lengths are non-increasing in weight; among equal weights the lower
    index gets the shorter (or equal) code.
    """
    n = len(weights)
    if n == 0:
        return []
    if n == 1:
        return [1]
    # heap entries: (weight, order, leaf symbols under this node)
    heap = [(w, i, (i,)) for i, w in enumerate(weights)]
    heapq.heapify(heap)
    depth = [0] * n
    order = n
    while len(heap) > 1:
        w1, _, s1 = heapq.heappop(heap)
        w2, _, s2 = heapq.heappop(heap)
        for s in s1:
            depth[s] += 1
        for s in s2:
            depth[s] += 1
        heapq.heappush(heap, (w1 + w2, order, s1 + s2))
        order += 1
    # Same multiset of lengths, handed out by descending weight, so ties
    # resolve by symbol value and the result stays optimal.
    ranked = sorted(range(n), key=lambda s: (-weights[s], s))
    lengths = [0] * n
    for sym, length in zip(ranked, sorted(depth)):
        lengths[sym] = length
    return lengths


def canonical_codes(lengths: Sequence[int]) -> list[int]:
    """Canonical codewords in (length, symbol) order; length 0 means unused."""
    codes = [0] * len(lengths)
    code = 0
    prev = 0
    used = [s for s in range(len(lengths)) if lengths[s]]
    for sym in sorted(used, key=lambda s: (lengths[s], s)):
        code <<= lengths[sym] - prev
        codes[sym] = code
        code += 1
        prev = lengths[sym]
    return codes


def kraft_complete(lengths: Sequence[int]) -> bool:
    """Exact check of sum(2**-l) == 1."""
    return sum(1 << (MAX_CODE_LEN - l) for l in lengths if l) == 1 << MAX_CODE_LEN


@dataclass(frozen=True)
class HuffmanTable:
    lengths: tuple[int, ...]
    codes: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.lengths) != ALPHABET:
            raise HuffmanError(f"need {ALPHABET} code lengths, got {len(self.lengths)}")
        for sym, l in enumerate(self.lengths):
            if not 1 <= l <= MAX_CODE_LEN:
                raise HuffmanError(f"symbol {sym:#04x}: code length {l} outside 1..32")
        if not kraft_complete(self.lengths):
            raise HuffmanError("code lengths violate Kraft equality")
        expected = tuple(canonical_codes(self.lengths))
        if not self.codes:
            object.__setattr__(self, "codes", expected)
        elif tuple(self.codes) != expected:
            raise HuffmanError("codes are not the canonical codes for these lengths")

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> HuffmanTable:
        return cls(tuple(lengths))

    def code_str(self, symbol: int) -> str:
        return format(self.codes[symbol], f"0{self.lengths[symbol]}b")

    def average_length(self, weights: Sequence[int]) -> float:
        total = sum(weights)
        return sum(w * l for w, l in zip(weights, self.lengths)) / total

    def encoded_bits(self, data: bytes) -> int:
        return sum(self.lengths[b] for b in data)

    @cached_property
    def _encode_arrays(self) -> tuple[array, bytes]:
        return array("I", self.codes), bytes(self.lengths)

    @cached_property
    def _decode_arrays(self) -> tuple[array, array, array, bytes]:
        counts = array("I", [0] * (MAX_CODE_LEN + 1))
        for l in self.lengths:
            counts[l] += 1
        first = array("Q", [0] * (MAX_CODE_LEN + 1))
        offsets = array("I", [0] * (MAX_CODE_LEN + 1))
        code = 0
        offset = 0
        for l in range(1, MAX_CODE_LEN + 1):
            first[l] = code
            offsets[l] = offset
            offset += counts[l]
            code = (code + counts[l]) << 1
        symbols = bytes(sorted(range(ALPHABET), key=lambda s: (self.lengths[s], s)))
        return first, counts, offsets, symbols


def build_table(frequencies: Sequence[int]) -> HuffmanTable:
    """Canonical table from 256 byte counts, each count smoothed by +1."""
    if len(frequencies) != ALPHABET:
        raise HuffmanError(f"need {ALPHABET} frequencies, got {len(frequencies)}")
    if any(f < 0 for f in frequencies):
        raise HuffmanError("negative frequency")
    lengths = code_lengths([f + 1 for f in frequencies])
    if max(lengths) > MAX_CODE_LEN:
        raise HuffmanError(f"code length {max(lengths)} exceeds {MAX_CODE_LEN} bits")
    return HuffmanTable(tuple(lengths))


def uniform_table() -> HuffmanTable:
    return HuffmanTable((8,) * ALPHABET)


def byte_frequencies(streams) -> list[int]:
    counts = [0] * ALPHABET
    for stream in streams:
        for b in stream:
            counts[b] += 1
    return counts


def huffman_encode(table: HuffmanTable, data: bytes) -> BitStream:
    writer = BitWriter()
    codes, lengths = table._encode_arrays
    writer.write_coded(bytes(data), codes, lengths)
    raw, bit_len = writer.getvalue()
    return BitStream(raw, bit_len)


def huffman_decode(table: HuffmanTable, stream: BitStream) -> bytes:
    first, counts, offsets, symbols = table._decode_arrays
    out, consumed = decode_canonical(
        stream.data, stream.bit_len, first, counts, offsets, symbols
    )
    if consumed != stream.bit_len:
        raise TruncatedCode(
            f"{stream.bit_len - consumed} trailing bits do not form a codeword"
        )
    return out


# --- serialization ------------------------------------------------------------


def table_blob_size(table: HuffmanTable) -> int:
    return ALPHABET + (sum(table.lengths) + 7) // 8


def serialize_table(table: HuffmanTable) -> bytes:
    """256 length bytes, then every codeword packed MSB-first in symbol order."""
    writer = BitWriter()
    for code, l in zip(table.codes, table.lengths):
        writer.write(code, l)
    packed, _ = writer.getvalue()
    return bytes(table.lengths) + packed


def deserialize_table(blob: bytes) -> HuffmanTable:
    if len(blob) < ALPHABET:
        raise TableFormatError(f"table blob truncated: {len(blob)} bytes")
    lengths = tuple(blob[:ALPHABET])
    if any(not 1 <= l <= MAX_CODE_LEN for l in lengths):
        raise TableFormatError("code length outside 1..32")
    if not kraft_complete(lengths):
        raise TableFormatError("code lengths violate Kraft equality")
    expected_size = ALPHABET + (sum(lengths) + 7) // 8
    if len(blob) != expected_size:
        raise TableFormatError(
            f"table blob is {len(blob)} bytes, lengths imply {expected_size}"
        )
    table = HuffmanTable(lengths)
    if serialize_table(table) != bytes(blob):
        raise TableFormatError("packed codes disagree with the code lengths")
    return table


def lengths_for(mapping: Mapping[int, int]) -> list[int]:
    """Complete a partial ``{symbol: length}`` assignment to a full 256-entry table.

    Unassigned symbols get the shortest lengths that still allow the Kraft sum
    to reach exactly one. Raises if the fixed lengths cannot be completed.
    """
    lengths = [0] * ALPHABET
    unit = 1 << MAX_CODE_LEN
    room = unit
    for sym, l in mapping.items():
        if not 1 <= l <= MAX_CODE_LEN:
            raise HuffmanError(f"code length {l} outside 1..32")
        lengths[sym] = l
        room -= unit >> l
    free = [s for s in range(ALPHABET) if not lengths[s]]
    if room < len(free) or (not free and room != 0):
        raise HuffmanError("fixed code lengths leave no room for a complete code")
    for i, sym in enumerate(free):
        left = len(free) - i - 1
        for l in range(1, MAX_CODE_LEN + 1):
            rest = room - (unit >> l)
            if rest >= 0 and left <= rest and bin(rest).count("1") <= left or (
                left == 0 and rest == 0
            ):
                lengths[sym] = l
                room = rest
                break
        else:
            raise HuffmanError("cannot complete code lengths")
    if room != 0:
        raise HuffmanError("fixed code lengths leave no room for a complete code")
    return lengths
