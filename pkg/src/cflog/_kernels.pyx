# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit kernels. Mirrors ``_kernels_py`` exactly."""

from libc.stdint cimport uint8_t, uint32_t, uint64_t

IMPLEMENTATION = "cython"


cdef class BitWriter:
    cdef uint64_t _acc
    cdef int _nbits
    cdef bytearray _out

    def __cinit__(self):
        self._acc = 0
        self._nbits = 0
        self._out = bytearray()

    @property
    def bit_len(self):
        return len(self._out) * 8 + self._nbits

    cdef inline void _push(self, uint32_t code, int length):
        # _nbits < 8 on entry, so the accumulator never exceeds 40 bits
        self._acc = (self._acc << length) | (code & ((<uint64_t>1 << length) - 1))
        self._nbits += length
        while self._nbits >= 8:
            self._nbits -= 8
            self._out.append(<uint8_t>((self._acc >> self._nbits) & 0xFF))
        self._acc &= (<uint64_t>1 << self._nbits) - 1

    def write(self, uint32_t code, int length):
        if length < 1 or length > 32:
            raise ValueError(f"code length must be in 1..32, got {length}")
        self._push(code, length)

    def write_bytes(self, const uint8_t[:] data):
        cdef Py_ssize_t i
        if self._nbits == 0:
            self._out += bytes(data)
            return
        for i in range(data.shape[0]):
            self._push(data[i], 8)

    def write_coded(self, const uint8_t[:] data, const uint32_t[:] codes,
                    const uint8_t[:] lengths):
        cdef Py_ssize_t i, n = data.shape[0]
        cdef uint8_t b
        cdef int need = 0
        for i in range(n):
            need += lengths[data[i]]
        cdef bytearray buf = bytearray((need + 7) // 8 + 1)
        cdef unsigned char[:] view = buf
        cdef Py_ssize_t w = 0
        cdef uint64_t acc = self._acc
        cdef int nbits = self._nbits
        for i in range(n):
            b = data[i]
            acc = (acc << lengths[b]) | codes[b]
            nbits += lengths[b]
            while nbits >= 8:
                nbits -= 8
                view[w] = <uint8_t>((acc >> nbits) & 0xFF)
                w += 1
            acc &= (<uint64_t>1 << nbits) - 1
        self._acc = acc
        self._nbits = nbits
        self._out += buf[:w]

    def getvalue(self):
        data = bytes(self._out)
        if self._nbits:
            data += bytes([<uint8_t>((self._acc << (8 - self._nbits)) & 0xFF)])
        return data, len(self._out) * 8 + self._nbits


def decode_canonical(const uint8_t[:] data, Py_ssize_t bit_len,
                     const uint64_t[:] first_code, const uint32_t[:] counts,
                     const uint32_t[:] offsets, const uint8_t[:] symbols):
    cdef Py_ssize_t nbytes = data.shape[0]
    cdef bytearray out = bytearray(bit_len + 1)
    cdef unsigned char[:] view = out
    cdef Py_ssize_t w = 0, pos = 0, consumed = 0, i
    cdef uint64_t code = 0, delta
    cdef int length = 0, shift
    cdef uint8_t byte
    for i in range(nbytes):
        byte = data[i]
        for shift in range(7, -1, -1):
            if pos >= bit_len:
                return bytes(out[:w]), consumed
            pos += 1
            code = (code << 1) | ((byte >> shift) & 1)
            length += 1
            if code >= first_code[length]:
                delta = code - first_code[length]
                if delta < counts[length]:
                    view[w] = symbols[offsets[length] + delta]
                    w += 1
                    code = 0
                    length = 0
                    consumed = pos
                    continue
            if length >= 32:
                return bytes(out[:w]), consumed
    return bytes(out[:w]), consumed
