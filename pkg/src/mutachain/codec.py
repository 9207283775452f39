"""Canonical binary encoding primitives.

Every protocol value (transaction, block header, block) serializes
through the helpers below.  The encoding is positional: fields are
written in their declared order with no tags or padding, so a value
encodes to the same bytes in every process and run.

Layout rules (normative)
------------------------

====================================  =====================================
value                                 encoding
====================================  =====================================
fixed-width unsigned integer          little-endian u8 / u16 / u32 / u64
byte-string                           u32 length prefix + raw bytes
collection                            u16 count prefix + elements
short collection (block key list)     u8 count prefix + elements
hash / public key / signature         raw bytes, fixed 32 / 32 / 64 wide
optional field                        u8 presence flag (0/1) + value
====================================  =====================================

Per-type field orders and widths live in the docstrings of the types
themselves (``tx.Transaction``, ``blocks.RemovableBlockHeader``,
``blocks.PermanentBlockHeader``); together with this table they are the
normative byte layout for everything written to disk or simulated wires.
"""

from __future__ import annotations

import struct

from .errors import DecodingError, EncodingError

U8_MAX = 0xFF
U16_MAX = 0xFFFF
U32_MAX = 0xFFFFFFFF
U64_MAX = 0xFFFFFFFFFFFFFFFF


class Writer:
    """Accumulates one canonical encoding."""

    def __init__(self):
        self._parts: list[bytes] = []

    def _int(self, value: int, fmt: str, limit: int, what: str) -> None:
        if not isinstance(value, int) or value < 0 or value > limit:
            raise EncodingError(f"{what} out of range: {value!r}")
        self._parts.append(struct.pack(fmt, value))

    def u8(self, value: int) -> None:
        self._int(value, "<B", U8_MAX, "u8")

    def u16(self, value: int) -> None:
        self._int(value, "<H", U16_MAX, "u16")

    def u32(self, value: int) -> None:
        self._int(value, "<I", U32_MAX, "u32")

    def u64(self, value: int) -> None:
        self._int(value, "<Q", U64_MAX, "u64")

    def fixed(self, data: bytes, width: int) -> None:
        if len(data) != width:
            raise EncodingError(f"expected {width} bytes, got {len(data)}")
        self._parts.append(bytes(data))

    def byte_string(self, data: bytes) -> None:
        if len(data) > U32_MAX:
            raise EncodingError("byte-string exceeds u32 length range")
        self.u32(len(data))
        self._parts.append(bytes(data))

    def count(self, n: int) -> None:
        if n > U16_MAX:
            raise EncodingError(f"collection exceeds u16 count range: {n}")
        self.u16(n)

    def short_count(self, n: int) -> None:
        if n > U8_MAX:
            raise EncodingError(f"collection exceeds u8 count range: {n}")
        self.u8(n)

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Sequentially decodes one canonical encoding."""

    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DecodingError(
                f"truncated input: need {n} bytes at offset {self._pos}, "
                f"have {len(self._data) - self._pos}")
        chunk = self._data[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def fixed(self, width: int) -> bytes:
        return self._take(width)

    def byte_string(self) -> bytes:
        return self._take(self.u32())

    def count(self) -> int:
        return self.u16()

    def short_count(self) -> int:
        return self.u8()

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)

    def expect_end(self) -> None:
        if not self.exhausted:
            raise DecodingError(
                f"{len(self._data) - self._pos} trailing byte(s) after value")


def encode_byte_string(data: bytes) -> bytes:
    """Standalone length-prefixed byte-string (u32 length + bytes)."""
    w = Writer()
    w.byte_string(data)
    return w.getvalue()
