"""Bit strings and the Elias universal integer codes.

Bits are stored most-significant-first within bytes and the final byte is
zero padded; ``length`` says how many bits are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import TruncatedError

__all__ = [
    "BitString", "BitCursor", "BitWriter",
    "elias_gamma_encode", "elias_gamma_decode",
    "elias_delta_encode", "elias_delta_decode", "elias_delta_length",
    "elias_delta_encode_many",
]


@dataclass(frozen=True)
class BitString:
    data: bytes = b""
    length: int = 0

    def __post_init__(self):
        if not 0 <= self.length <= 8 * len(self.data) or len(self.data) != (self.length + 7) // 8:
            raise ValueError("length does not match the byte buffer")

    @classmethod
    def from_int(cls, value: int, nbits: int) -> "BitString":
        if nbits < 0 or value < 0 or value >> nbits:
            raise ValueError(f"{value} does not fit in {nbits} bits")
        pad = -nbits % 8
        return cls((value << pad).to_bytes((nbits + pad) // 8, "big"), nbits)

    @classmethod
    def from_str(cls, bits: str) -> "BitString":
        if bits.strip("01"):
            raise ValueError("bit strings contain only '0' and '1'")
        return cls.from_int(int(bits, 2) if bits else 0, len(bits))

    @classmethod
    def concat(cls, parts: Iterable["BitString"]) -> "BitString":
        writer = BitWriter()
        for part in parts:
            writer.write_bits(part)
        return writer.getvalue()

    def __len__(self) -> int:
        return self.length

    def __add__(self, other: "BitString") -> "BitString":
        return BitString.concat((self, other))

    def __iter__(self) -> Iterator[int]:
        for i in range(self.length):
            yield (self.data[i >> 3] >> (7 - (i & 7))) & 1

    def to_int(self) -> int:
        return int.from_bytes(self.data, "big") >> (-self.length % 8)

    def to_str(self) -> str:
        return format(self.to_int(), f"0{self.length}b") if self.length else ""

    def __str__(self) -> str:
        return self.to_str()

    def startswith(self, other: "BitString") -> bool:
        if other.length > self.length:
            return False
        return BitCursor(self).peek(other.length) == other.to_int()


class BitWriter:
    """Accumulates integer chunks and assembles them into one BitString."""

    def __init__(self):
        self._chunks: list[str] = []
        self.length = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits == 0:
            return
        if value < 0 or value >> nbits:
            raise ValueError(f"{value} does not fit in {nbits} bits")
        self._chunks.append(format(value, f"0{nbits}b"))
        self.length += nbits

    def write_bits(self, bits: BitString) -> None:
        self.write(bits.to_int(), bits.length)

    def getvalue(self) -> BitString:
        return BitString.from_str("".join(self._chunks))


class BitCursor:
    """Read position over a BitString."""

    __slots__ = ("bits", "position")

    def __init__(self, bits: BitString, position: int = 0):
        if not 0 <= position <= bits.length:
            raise ValueError("cursor position out of range")
        self.bits = bits
        self.position = position

    @property
    def remaining(self) -> int:
        return self.bits.length - self.position

    def _extract(self, pos: int, nbits: int) -> int:
        data = self.bits.data
        first, last = pos >> 3, (pos + nbits + 7) >> 3
        chunk = int.from_bytes(data[first:last], "big")
        chunk <<= 8 * (last - first) - 8 * (min(last, len(data)) - first)
        return (chunk >> (8 * last - pos - nbits)) & ((1 << nbits) - 1)

    def peek(self, nbits: int) -> int:
        """Next ``nbits`` bits as an integer, zero padded past the end."""
        if nbits == 0:
            return 0
        return self._extract(self.position, nbits)

    def read(self, nbits: int) -> int:
        if nbits > self.remaining:
            raise TruncatedError(f"need {nbits} bits, {self.remaining} left")
        value = self.peek(nbits)
        self.position += nbits
        return value

    def read_bit(self) -> int:
        return self.read(1)

    def skip(self, nbits: int) -> None:
        if nbits > self.remaining:
            raise TruncatedError(f"cannot skip {nbits} bits, {self.remaining} left")
        self.position += nbits


def _gamma_parts(k: int) -> tuple[int, int]:
    if k < 1:
        raise ValueError(f"Elias codes are defined for k >= 1, got {k}")
    n = k.bit_length() - 1
    return k, 2 * n + 1


def elias_gamma_encode(k: int) -> BitString:
    """``floor(lb k)`` zeros followed by the binary digits of ``k``."""
    value, nbits = _gamma_parts(int(k))
    return BitString.from_int(value, nbits)


def elias_gamma_decode(bits: BitString, cursor: BitCursor) -> int:
    window = cursor.peek(64)
    if window:
        zeros = 64 - window.bit_length()
        cursor.skip(zeros)
    else:
        zeros = 0
        while cursor.read_bit() == 0:
            zeros += 1
        cursor.position -= 1
    return cursor.read(zeros + 1)


def _write_delta(writer: BitWriter, k: int) -> None:
    n = k.bit_length() - 1
    writer.write(*_gamma_parts(n + 1))
    writer.write(k & ((1 << n) - 1), n)


def elias_delta_encode(k: int) -> BitString:
    """Gamma code of ``floor(lb k) + 1`` followed by ``k`` without its leading one."""
    k = int(k)
    if k < 1:
        raise ValueError(f"Elias codes are defined for k >= 1, got {k}")
    writer = BitWriter()
    _write_delta(writer, k)
    return writer.getvalue()


def elias_delta_decode(bits: BitString, cursor: BitCursor) -> int:
    n = elias_gamma_decode(bits, cursor) - 1
    return (1 << n) | cursor.read(n)


def elias_delta_length(k: int) -> int:
    n = int(k).bit_length() - 1
    return n + 2 * (n + 1).bit_length() - 1


def elias_delta_encode_many(values: Iterable[int]) -> BitString:
    writer = BitWriter()
    for k in values:
        if k < 1:
            raise ValueError(f"Elias codes are defined for k >= 1, got {k}")
        _write_delta(writer, int(k))
    return writer.getvalue()
