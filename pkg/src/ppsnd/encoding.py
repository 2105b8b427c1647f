"""Low-level byte encoding shared by every wire structure.

Integers are big-endian. Variable-length fields carry a 4-byte unsigned
big-endian length prefix. Unsigned big integers use their minimal encoding
(zero encodes as the empty string), so every value has exactly one form.
"""

from __future__ import annotations

import struct

from .errors import DecodeError

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_I64 = struct.Struct(">q")


def int_to_bytes(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative integers have no unsigned encoding")
    return value.to_bytes((value.bit_length() + 7) // 8, "big")


def int_from_bytes(data: bytes) -> int:
    if data[:1] == b"\x00":
        raise DecodeError("non-canonical integer: leading zero byte")
    return int.from_bytes(data, "big")


def pack_var(data: bytes) -> bytes:
    return _U32.pack(len(data)) + bytes(data)


def pack_int(value: int) -> bytes:
    return pack_var(int_to_bytes(value))


def pack_u64(value: int) -> bytes:
    return _U64.pack(value)


def pack_i64(value: int) -> bytes:
    return _I64.pack(value)


class Reader:
    """Cursor over a byte string; every read raises DecodeError on truncation."""

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def take(self, size: int) -> bytes:
        end = self.pos + size
        if size < 0 or end > len(self.data):
            raise DecodeError(f"truncated input: wanted {size} bytes at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def var(self) -> bytes:
        (size,) = _U32.unpack(self.take(4))
        return self.take(size)

    def int(self) -> int:
        return int_from_bytes(self.var())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")
