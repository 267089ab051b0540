"""Canonical binary encoding and hashing used network-wide.

Every structure that is hashed, signed or persisted goes through this
encoding so that identical logical content yields identical bytes on every
peer: fields in declared order, integers as 8-byte big-endian, floats as
IEEE-754 binary64 big-endian, byte strings length-prefixed (8-byte
big-endian), lists count-prefixed. Hash output is always 32 bytes and the
algorithm is pinned by a one-byte identifier so persisted files stay
self-describing.
"""

from __future__ import annotations

import hashlib
import struct

HASH_ALG_SHA256 = 0x01
HASH_LEN = 32
ZERO_HASH = b"\x00" * HASH_LEN

_U64 = struct.Struct(">Q")
_F64 = struct.Struct(">d")


class CodecError(ValueError):
    """Malformed or truncated canonical bytes."""


def checked_hash(data: bytes, alg: int = HASH_ALG_SHA256) -> bytes:
    if alg != HASH_ALG_SHA256:
        raise CodecError(f"unknown hash algorithm id {alg}")
    return hashlib.sha256(data).digest()


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Encoder:
    """Append-only canonical byte writer."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u64(self, value: int) -> "Encoder":
        if value < 0 or value > 0xFFFFFFFFFFFFFFFF:
            raise CodecError(f"u64 out of range: {value}")
        self._parts.append(_U64.pack(value))
        return self

    def boolean(self, value: bool) -> "Encoder":
        return self.u64(1 if value else 0)

    def f64(self, value: float) -> "Encoder":
        self._parts.append(_F64.pack(value))
        return self

    def raw(self, data: bytes) -> "Encoder":
        self._parts.append(data)
        return self

    def bytestr(self, data: bytes) -> "Encoder":
        self._parts.append(_U64.pack(len(data)))
        self._parts.append(data)
        return self

    def string(self, text: str) -> "Encoder":
        return self.bytestr(text.encode("utf-8"))

    def count(self, n: int) -> "Encoder":
        return self.u64(n)

    def done(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    """Bounds-checked reader for canonical bytes."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CodecError("truncated canonical bytes")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def boolean(self) -> bool:
        v = self.u64()
        if v not in (0, 1):
            raise CodecError(f"boolean field holds {v}")
        return v == 1

    def f64(self) -> float:
        return _F64.unpack(self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def bytestr(self) -> bytes:
        n = self.u64()
        if n > len(self._data) - self._pos:
            raise CodecError("byte string length exceeds buffer")
        return self._take(n)

    def string(self) -> str:
        try:
            return self.bytestr().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CodecError("invalid utf-8 in string field") from exc

    def count(self) -> int:
        n = self.u64()
        # Any legitimate list element costs at least one byte.
        if n > len(self._data) - self._pos:
            raise CodecError("list count exceeds buffer")
        return n

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise CodecError(f"{len(self._data) - self._pos} trailing bytes")

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos
