"""On-disk container: a fixed header followed by the concatenated payloads.

Layout, little-endian throughout::

    magic        4 bytes   b"RECB"
    version      u8        1
    mechanism    u8        mechanism id
    n_params     u64       number of parameters that follow
    params       f64 * n_params
    codec        u8        0 rejection, 1 pfr, 2 dq, 3 lq
    seed         u64
    records      u64
    payload_bits u64
    payload      ceil(payload_bits / 8) bytes, MSB first, zero padded

The seed travels in the clear; its bits are not counted as payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .codes import BitCursor, BitString, BitWriter
from .errors import CodecError, FormatError
from .models import Mechanism, mechanism_from_params
from .records import CODECS, decode_record, encode_record
from .selection import UNLIMITED, Budget

MAGIC = b"RECB"
VERSION = 1
CODEC_IDS = {name: i for i, name in enumerate(CODECS)}


@dataclass
class ContainerHeader:
    mechanism_id: int
    params: list[float]
    codec: str
    seed: int
    record_count: int
    payload_bits: int
    version: int = VERSION

    def pack(self) -> bytes:
        return b"".join([
            MAGIC,
            struct.pack("<BBQ", self.version, self.mechanism_id, len(self.params)),
            struct.pack(f"<{len(self.params)}d", *self.params),
            struct.pack("<BQQQ", CODEC_IDS[self.codec], self.seed,
                        self.record_count, self.payload_bits),
        ])

    @property
    def size(self) -> int:
        return 4 + 10 + 8 * len(self.params) + 25

    @classmethod
    def unpack(cls, blob: bytes) -> "ContainerHeader":
        if len(blob) < 14 or blob[:4] != MAGIC:
            raise FormatError("not a container file (bad magic)")
        version, mech_id, n_params = struct.unpack_from("<BBQ", blob, 4)
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        if n_params > (len(blob) - 14) // 8:
            raise FormatError("truncated parameter block")
        params = list(struct.unpack_from(f"<{n_params}d", blob, 14))
        offset = 14 + 8 * n_params
        if len(blob) < offset + 25:
            raise FormatError("truncated header")
        codec_id, seed, count, nbits = struct.unpack_from("<BQQQ", blob, offset)
        if codec_id >= len(CODECS):
            raise FormatError(f"unknown codec id {codec_id}")
        header = cls(mech_id, params, CODECS[codec_id], seed, count, nbits, version)
        if nbits > 8 * (len(blob) - header.size):
            raise FormatError("payload shorter than the header claims")
        return header


@dataclass
class Container:
    header: ContainerHeader
    payload: BitString = field(default_factory=BitString)

    def to_bytes(self) -> bytes:
        return self.header.pack() + self.payload.data

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Container":
        header = ContainerHeader.unpack(blob)
        nbytes = (header.payload_bits + 7) // 8
        data = blob[header.size: header.size + nbytes]
        return cls(header, BitString(data, header.payload_bits))


def encode_records(mech: Mechanism, codec: str, xs: Iterable, seed: int,
                   budget: Budget = UNLIMITED) -> Container:
    writer = BitWriter()
    count = 0
    for i, x in enumerate(xs):
        try:
            writer.write_bits(encode_record(mech, codec, x, seed, i, budget))
        except CodecError as exc:
            raise CodecError(f"record {i}: {exc}") from exc
        count += 1
    header = ContainerHeader(mech.mechanism_id, mech.params(), codec, seed, count, writer.length)
    return Container(header, writer.getvalue())


def decode_records(container: Container) -> list:
    h = container.header
    try:
        mech = mechanism_from_params(h.mechanism_id, h.params)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad mechanism block: {exc}") from exc
    cursor = BitCursor(container.payload)
    out = []
    for i in range(h.record_count):
        try:
            out.append(decode_record(mech, h.codec, container.payload, cursor, h.seed, i))
        except CodecError as exc:
            raise CodecError(f"record {i}: {exc}") from exc
    return out


def parse_records(text: str) -> list:
    """Newline-separated decimals; integral tokens come back as ``int``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        token = line.strip()
        if not token:
            continue
        try:
            out.append(int(token))
        except ValueError:
            try:
                out.append(float(token))
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse {token!r}") from None
    return out


def format_records(values: Sequence) -> str:
    return "".join(f"{v!r}\n" for v in values)
