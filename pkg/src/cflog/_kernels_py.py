"""Pure-Python bit kernels. Same API as the compiled ``_kernels`` module."""

from __future__ import annotations

IMPLEMENTATION = "python"


class BitWriter:
    """Append-only MSB-first bit sink."""

    __slots__ = ("_acc", "_nbits", "_out")

    def __init__(self) -> None:
        self._acc = 0
        self._nbits = 0
        self._out = bytearray()

    @property
    def bit_len(self) -> int:
        return len(self._out) * 8 + self._nbits

    def write(self, code: int, length: int) -> None:
        if not 1 <= length <= 32:
            raise ValueError(f"code length must be in 1..32, got {length}")
        self._acc = (self._acc << length) | (code & ((1 << length) - 1))
        self._nbits += length
        if self._nbits >= 32:
            self._drain()

    def write_bytes(self, data: bytes) -> None:
        if self._nbits == 0:
            self._out += data
            return
        for b in data:
            self._acc = (self._acc << 8) | b
            self._out.append((self._acc >> self._nbits) & 0xFF)
            self._acc &= (1 << self._nbits) - 1

    def write_coded(self, data: bytes, codes, lengths) -> None:
        """Append the codeword of every byte in ``data``."""
        acc, nbits, out = self._acc, self._nbits, self._out
        for b in data:
            n = lengths[b]
            acc = (acc << n) | codes[b]
            nbits += n
            while nbits >= 8:
                nbits -= 8
                out.append((acc >> nbits) & 0xFF)
            acc &= (1 << nbits) - 1
        self._acc, self._nbits = acc, nbits

    def _drain(self) -> None:
        while self._nbits >= 8:
            self._nbits -= 8
            self._out.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def getvalue(self) -> tuple[bytes, int]:
        """Return ``(bytes, bit_len)`` with the last byte zero-padded."""
        self._drain()
        data = bytes(self._out)
        if self._nbits:
            data += bytes([(self._acc << (8 - self._nbits)) & 0xFF])
        return data, self.bit_len


def decode_canonical(data: bytes, bit_len: int, first_code, counts, offsets, symbols):
    """Decode a canonical prefix code.

    ``first_code``, ``counts`` and ``offsets`` are indexed by code length
    (1..32); ``symbols`` lists symbols in (length, symbol) order. Returns
    ``(decoded, consumed_bits)``; ``consumed_bits < bit_len`` means the stream
    ended inside a codeword.
    """
    out = bytearray()
    code = 0
    length = 0
    consumed = 0
    pos = 0
    for byte in data:
        for shift in range(7, -1, -1):
            if pos >= bit_len:
                return bytes(out), consumed
            pos += 1
            code = (code << 1) | ((byte >> shift) & 1)
            length += 1
            delta = code - first_code[length]
            if 0 <= delta < counts[length]:
                out.append(symbols[offsets[length] + delta])
                code = 0
                length = 0
                consumed = pos
            elif length >= 32:
                return bytes(out), consumed
    return bytes(out), consumed
