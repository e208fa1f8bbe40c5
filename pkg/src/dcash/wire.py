"""Canonical byte encodings.

Everything that is hashed, signed or written to the board log goes through
``Writer``/``Reader`` so the byte forms are fixed-length and bit-exact.
"""

from __future__ import annotations

from .groups import DecodeError, Element


class Writer:
    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(1, "big"))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(4, "big"))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(8, "big"))
        return self

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(bytes(b))
        return self

    def blob(self, b: bytes) -> "Writer":
        return self.u32(len(b)).raw(b)

    def element(self, e: Element) -> "Writer":
        return self.raw(e.to_bytes())

    def scalar(self, group, k: int) -> "Writer":
        return self.raw(group.encode_scalar(k))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes):
        self._data = memoryview(bytes(data))
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DecodeError("unexpected end of data")
        out = bytes(self._data[self._pos:self._pos + n])
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def blob(self, limit: int = 1 << 20) -> bytes:
        n = self.u32()
        if n > limit:
            raise DecodeError("blob too long")
        return self.take(n)

    def element(self, group) -> Element:
        return group.decode(self.take(group.element_size))

    def scalar(self, group) -> int:
        return group.decode_scalar(self.take(group.scalar_size))

    def done(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError("trailing bytes")
