"""Protocol messages and their canonical byte encoding.

Layout of every frame: a 1-byte tag followed by the message fields in
declaration order. Fixed-size fields (pids, digests, nonces) are raw bytes,
64-bit integers are big-endian, and all other fields are 4-byte length
prefixed. Unsigned big integers (ciphertexts) use their minimal big-endian
form. See ``docs/wire-format.md`` for the byte-level table.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import ClassVar, Union

from .encoding import Reader, pack_i64, pack_int, pack_u64, pack_var
from .errors import DecodeError

PID_LEN = 32
DIGEST_LEN = 32
NONCE_LEN = 16


def increment_nonce(nonce: bytes) -> bytes:
    """Big-endian +1 modulo 2**128."""
    value = (int.from_bytes(nonce, "big") + 1) % (1 << (8 * NONCE_LEN))
    return value.to_bytes(NONCE_LEN, "big")


# Field kinds: "pid"/"digest"/"nonce" fixed raw; "bytes" length-prefixed;
# "int" length-prefixed unsigned bigint; "u64"/"i64" fixed 8 bytes; "str" utf-8 length-prefixed.
_FIXED = {"pid": PID_LEN, "digest": DIGEST_LEN, "nonce": NONCE_LEN}


@dataclass(frozen=True)
class Message:
    TAG: ClassVar[int]
    FIELDS: ClassVar[tuple[tuple[str, str], ...]]

    @property
    def name(self) -> str:
        return type(self).__name__

    def to_bytes(self) -> bytes:
        return encode(self)


@dataclass(frozen=True)
class MsgA(Message):
    """(a) advertisement: commitment to n1, signature over n1, pseudonym."""
    sender_pid: bytes
    h_n1: bytes
    auth_a: bytes
    pnym_a: bytes
    TAG: ClassVar[int] = 0x01
    FIELDS: ClassVar = (("sender_pid", "pid"), ("h_n1", "digest"), ("auth_a", "bytes"), ("pnym_a", "bytes"))


@dataclass(frozen=True)
class MsgB(Message):
    """(b) ranging challenge revealing n1."""
    sender_pid: bytes
    n1: bytes
    TAG: ClassVar[int] = 0x02
    FIELDS: ClassVar = (("sender_pid", "pid"), ("n1", "nonce"))


@dataclass(frozen=True)
class MsgC(Message):
    """(c) ranging response carrying n2."""
    sender_pid: bytes
    dest_pid: bytes
    n2: bytes
    TAG: ClassVar[int] = 0x03
    FIELDS: ClassVar = (("sender_pid", "pid"), ("dest_pid", "pid"), ("n2", "nonce"))


@dataclass(frozen=True)
class MsgD(Message):
    """(d) authenticator of the ranging exchange plus responder pseudonym."""
    sender_pid: bytes
    dest_pid: bytes
    n2_plus_1: bytes
    auth_b: bytes
    pnym_b: bytes
    TAG: ClassVar[int] = 0x04
    FIELDS: ClassVar = (("sender_pid", "pid"), ("dest_pid", "pid"), ("n2_plus_1", "nonce"),
                        ("auth_b", "bytes"), ("pnym_b", "bytes"))


@dataclass(frozen=True)
class MsgE(Message):
    """(e) initiator coordinates encrypted under its own Paillier key."""
    sender_pid: bytes
    dest_pid: bytes
    x_a: int
    y_a: int
    auth_a: bytes
    TAG: ClassVar[int] = 0x05
    FIELDS: ClassVar = (("sender_pid", "pid"), ("dest_pid", "pid"), ("x_a", "int"), ("y_a", "int"),
                        ("auth_a", "bytes"))


@dataclass(frozen=True)
class MsgF(Message):
    """(f) encrypted coordinate differences computed by the responder."""
    sender_pid: bytes
    dest_pid: bytes
    diff_lat: int
    diff_lng: int
    auth_b: bytes
    TAG: ClassVar[int] = 0x06
    FIELDS: ClassVar = (("sender_pid", "pid"), ("dest_pid", "pid"), ("diff_lat", "int"),
                        ("diff_lng", "int"), ("auth_b", "bytes"))


@dataclass(frozen=True)
class BaseChallenge(Message):
    """Baseline (a): time, n1."""
    sender_id: str
    time: int
    n1: bytes
    TAG: ClassVar[int] = 0x11
    FIELDS: ClassVar = (("sender_id", "str"), ("time", "u64"), ("n1", "nonce"))


@dataclass(frozen=True)
class BaseResponse(Message):
    """Baseline (b): time, n2."""
    sender_id: str
    dest_id: str
    time: int
    n2: bytes
    TAG: ClassVar[int] = 0x12
    FIELDS: ClassVar = (("sender_id", "str"), ("dest_id", "str"), ("time", "u64"), ("n2", "nonce"))


@dataclass(frozen=True)
class BaseAuth(Message):
    """Baseline (c): time, plaintext location, certificate, signature."""
    sender_id: str
    dest_id: str
    time: int
    lat_units: int
    lng_units: int
    certificate: bytes
    auth_b: bytes
    TAG: ClassVar[int] = 0x13
    FIELDS: ClassVar = (("sender_id", "str"), ("dest_id", "str"), ("time", "u64"), ("lat_units", "i64"),
                        ("lng_units", "i64"), ("certificate", "bytes"), ("auth_b", "bytes"))


ProtocolMessage = Union[MsgA, MsgB, MsgC, MsgD, MsgE, MsgF, BaseChallenge, BaseResponse, BaseAuth]
MESSAGE_TYPES: dict[int, type[Message]] = {
    cls.TAG: cls for cls in (MsgA, MsgB, MsgC, MsgD, MsgE, MsgF, BaseChallenge, BaseResponse, BaseAuth)
}


def _pack_field(kind: str, value) -> bytes:
    if kind in _FIXED:
        if not isinstance(value, (bytes, bytearray)) or len(value) != _FIXED[kind]:
            raise ValueError(f"{kind} field must be {_FIXED[kind]} bytes")
        return bytes(value)
    if kind == "bytes":
        return pack_var(value)
    if kind == "str":
        return pack_var(value.encode())
    if kind == "int":
        return pack_int(value)
    if kind == "u64":
        return pack_u64(value)
    if kind == "i64":
        return pack_i64(value)
    raise AssertionError(kind)


def _read_field(reader: Reader, kind: str):
    if kind in _FIXED:
        return reader.take(_FIXED[kind])
    if kind == "bytes":
        return reader.var()
    if kind == "str":
        try:
            return reader.var().decode()
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8 in text field") from exc
    if kind == "int":
        return reader.int()
    if kind == "u64":
        return reader.u64()
    if kind == "i64":
        return reader.i64()
    raise AssertionError(kind)


def encode(message: Message) -> bytes:
    parts = [bytes([message.TAG])]
    parts.extend(_pack_field(kind, getattr(message, name)) for name, kind in message.FIELDS)
    return b"".join(parts)


def decode(data: bytes) -> ProtocolMessage:
    reader = Reader(data)
    tag = reader.u8()
    cls = MESSAGE_TYPES.get(tag)
    if cls is None:
        raise DecodeError(f"unknown message tag 0x{tag:02x}")
    values = {name: _read_field(reader, kind) for name, kind in cls.FIELDS}
    reader.done()
    return cls(**values)


def peek_tag(data: bytes) -> str:
    cls = MESSAGE_TYPES.get(data[0]) if data else None
    return cls.__name__ if cls else "unknown"


def field_values(message: Message) -> dict:
    return {f.name: getattr(message, f.name) for f in dataclasses.fields(message)}
