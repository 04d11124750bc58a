import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chunk_mean_image
from qmal import SECTION_KEYS
from qmal.corpus import build_pe
from qmal.errors import EmptySpan, MissingMzMagic
from qmal.imaging import FileRecord, build_record, bytes_to_image


def test_one_byte_per_pixel():
    img = bytes_to_image(bytes(range(64)), 8)
    assert img.shape == (8, 8)
    assert img.ravel().tolist() == list(range(64))


def test_pairs_are_averaged():
    span = bytes(v for k in range(64) for v in (4 * k % 256, (4 * k + 2) % 256))
    expected = chunk_mean_image(span, 8)
    assert bytes_to_image(span, 8).ravel().tolist() == expected
    # frozen from the oracle: first pixels are means of (0,2), (4,6), (8,10)
    assert expected[:3] == [1, 5, 9]


def test_short_span_is_zero_padded():
    img = bytes_to_image(b"\xff" * 10, 8).ravel().tolist()
    assert img == chunk_mean_image(b"\xff" * 10, 8)
    assert img == [255] * 10 + [0] * 54


def test_uneven_chunks_put_extra_bytes_first():
    # 65 bytes: chunk 0 has 2 bytes, the rest 1
    span = bytes([10, 20]) + bytes(range(63))
    img = bytes_to_image(span, 8).ravel().tolist()
    assert img[0] == 15
    assert img[1:] == list(range(63))


def test_full_side():
    span = bytes(range(256)) * 32
    img = bytes_to_image(span, 64)
    assert img.shape == (64, 64)
    assert img.ravel().tolist() == chunk_mean_image(span, 64)


def test_empty_span_rejected():
    with pytest.raises(EmptySpan):
        bytes_to_image(b"", 8)


def test_bad_side_rejected():
    with pytest.raises(ValueError):
        bytes_to_image(b"abc", 16)


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=1, max_size=10_000))
def test_matches_naive_chunk_means(span):
    img = bytes_to_image(span, 8)
    assert img.ravel().tolist() == chunk_mean_image(span, 8)
    assert img.dtype == np.uint8


def test_record_with_only_text():
    data, _ = build_pe([(".text", bytes(range(200)))])
    rec = build_record(data, 1)
    assert rec.present("text")
    assert [k for k in SECTION_KEYS if not rec.present(k)] == ["data", "rdata", "rsrc", "reloc"]
    assert rec.sha256 == hashlib.sha256(data).hexdigest()
    assert rec.full.shape == (64, 64)


def test_record_propagates_parse_errors():
    with pytest.raises(MissingMzMagic):
        build_record(b"not a pe file at all", 0)


def test_record_is_deterministic(sample_pes):
    data = sample_pes[3][0]
    a, b = build_record(data, 1), build_record(data, 1)
    assert a.to_json() == b.to_json()


def test_record_json_round_trip(sample_pes):
    rec = build_record(sample_pes[1][0], 1)
    rec.split, rec.fold = "test", ""
    back = FileRecord.from_json(rec.to_json())
    assert back.to_json() == rec.to_json()
    for key in SECTION_KEYS:
        a, b = rec.sections[key], back.sections[key]
        assert (a is None and b is None) or np.array_equal(a, b)


def test_record_json_shape():
    import json
    data, _ = build_pe([(".rsrc", b"\x10" * 640)])
    obj = json.loads(build_record(data, 0).to_json())
    assert set(obj) == {"sha256", "label", "sections", "full"}
    assert obj["sections"]["text"] is None
    assert obj["sections"]["rsrc"] == [16] * 64
    assert len(obj["full"]) == 4096


def test_label_validated():
    with pytest.raises(ValueError):
        FileRecord(sha256="x", label=2)
