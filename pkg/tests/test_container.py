import struct

import numpy as np
import pytest

from relentcode.container import (MAGIC, Container, ContainerHeader, decode_records,
                                  encode_records, format_records, parse_records)
from relentcode.errors import BudgetExhausted, CodecError, FormatError
from relentcode.models import (AdditiveUnimodalMechanism, CategoricalMechanism,
                               GaussianGaussianMechanism, Laplace, Normal, UniformAdditiveMechanism)
from relentcode.dither import laplace_smsu
from relentcode.records import check_codec
from relentcode.selection import Budget

MATRIX = [
    (UniformAdditiveMechanism(16), "dq", [0, 3, 15, 7, 7]),
    (UniformAdditiveMechanism(16), "lq", [0, 3, 15, 7, 7]),
    (UniformAdditiveMechanism(16), "rejection", [0, 3, 15]),
    (UniformAdditiveMechanism(16), "pfr", [0, 3, 15]),
    (CategoricalMechanism([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]]), "rejection", [0, 1, 1, 0]),
    (CategoricalMechanism([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]]), "pfr", [0, 1, 1, 0]),
    (GaussianGaussianMechanism(1.0, 0.5), "lq", [0.3, -1.7, 2.2]),
    (GaussianGaussianMechanism(1.0, 0.5), "pfr", [0.3, -1.7, 2.2]),
    (AdditiveUnimodalMechanism(Normal(0, 1), Laplace(0, 0.5), laplace_smsu(0.5)), "lq", [0.1, 1.4]),
]


@pytest.mark.parametrize("mech,codec,xs", MATRIX)
def test_roundtrip_matrix(mech, codec, xs):
    budget = Budget(10**6)
    blob = encode_records(mech, codec, xs, 99, budget).to_bytes()
    assert blob == encode_records(mech, codec, xs, 99, budget).to_bytes()
    ys = decode_records(Container.from_bytes(blob))
    assert len(ys) == len(xs)
    if codec == "dq":
        assert all(-0.5 < y - x <= 0.5 for x, y in zip(xs, ys))
    if codec == "lq" and isinstance(mech, UniformAdditiveMechanism):
        assert all(-0.5 < y - x <= 0.5 for x, y in zip(xs, ys))
    if isinstance(mech, CategoricalMechanism):
        assert set(ys) <= {0, 1}


def test_header_layout():
    h = ContainerHeader(3, [16.0], "dq", 7, 2, 10)
    raw = h.pack()
    assert raw[:4] == MAGIC and len(raw) == h.size == 39 + 8
    assert struct.unpack_from("<BBQd", raw, 4) == (1, 3, 1, 16.0)
    assert struct.unpack_from("<BQQQ", raw, 22) == (2, 7, 2, 10)
    assert ContainerHeader.unpack(raw + b"\x00\x00") == h


def test_empty_input_gives_empty_container():
    c = encode_records(UniformAdditiveMechanism(16), "dq", [], 1)
    assert c.header.record_count == 0 and c.header.payload_bits == 0
    assert decode_records(Container.from_bytes(c.to_bytes())) == []


@pytest.mark.parametrize("mutate", [
    lambda b: b"RECX" + b[4:],
    lambda b: b[:4] + b"\x02" + b[5:],
    lambda b: b[:10],
    lambda b: b[:-1],
    lambda b: b[:4 + 10 + 8] + b"\x09" + b[4 + 10 + 8 + 1:],
])
def test_corrupt_headers_are_refused(mutate):
    blob = encode_records(UniformAdditiveMechanism(16), "dq", [1, 2, 3], 1).to_bytes()
    with pytest.raises(FormatError):
        Container.from_bytes(mutate(blob))


def test_bad_mechanism_block_is_a_format_error():
    h = ContainerHeader(3, [], "dq", 0, 0, 0)
    with pytest.raises(FormatError):
        decode_records(Container.from_bytes(h.pack()))


def test_codec_errors_name_the_record():
    from relentcode.selection import selection_select

    mech = UniformAdditiveMechanism(64)
    first_bad = None
    for i in range(50):
        try:
            selection_select(mech, 0, 1, i, "rejection", Budget(1))
        except BudgetExhausted:
            first_bad = i
            break
    with pytest.raises(CodecError, match=f"record {first_bad}:"):
        encode_records(mech, "rejection", [0] * 50, 1, Budget(1))


def test_substream_isolation():
    from relentcode.codes import BitString, elias_delta_encode
    from relentcode.selection import selection_select

    mech = UniformAdditiveMechanism(16)
    xs = [i % 16 for i in range(40)]
    target = next(i for i in range(40) if selection_select(mech, xs[i], 5, i, "rejection").index >= 2)
    c = encode_records(mech, "rejection", xs, 5)
    clean = decode_records(c)
    # flip the last mantissa bit of one delta codeword: same length, different index
    start = sum(len(elias_delta_encode(selection_select(mech, xs[i], 5, i, "rejection").index))
                for i in range(target))
    end = start + len(elias_delta_encode(selection_select(mech, xs[target], 5, target, "rejection").index))
    bits = c.payload.to_str()
    flipped = bits[:end - 1] + ("1" if bits[end - 1] == "0" else "0") + bits[end:]
    got = decode_records(Container(c.header, BitString.from_str(flipped)))
    assert got[target] != clean[target]
    assert got[:target] == clean[:target] and got[target + 1:] == clean[target + 1:]


def test_codec_compatibility_checks():
    with pytest.raises(ValueError):
        check_codec(GaussianGaussianMechanism(), "dq")
    with pytest.raises(ValueError):
        check_codec(CategoricalMechanism.independent([0.5, 0.5]), "lq")
    with pytest.raises(ValueError):
        check_codec(UniformAdditiveMechanism(), "huffman")
    check_codec(AdditiveUnimodalMechanism(Normal(0, 1), Normal(0, 1)), "pfr")


def test_record_text_format():
    assert parse_records("1\n\n 2.5 \n-3\n") == [1, 2.5, -3]
    assert format_records([1, 0.1]) == "1\n0.1\n"
    with pytest.raises(ValueError, match="line 2"):
        parse_records("1\nabc\n")
