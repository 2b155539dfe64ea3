"""Value-level contracts: times, intervals, paths, schemas, payloads."""

from __future__ import annotations

import math
import struct

import pytest

from condstore import (
    MINUS_INF,
    PLUS_INF,
    AttrKind,
    PartitionAxis,
    PartitionPolicy,
    PayloadSchema,
    ValidityInterval,
    format_time,
    make_schema,
    parse_partition_policy,
    parse_path,
    parse_schema,
    parse_time,
)
from condstore.errors import (
    InvalidArgument,
    InvalidInterval,
    InvalidPath,
    InvalidSchema,
    SchemaMismatch,
)
from condstore.model import validate_payload, validate_time


# ------------------------------------------------------------------ time axis

def test_time_zero_is_an_ordinary_point():
    assert validate_time(0) == 0
    assert validate_time(MINUS_INF) == MINUS_INF


def test_time_rejects_the_plus_inf_sentinel():
    with pytest.raises(InvalidArgument):
        validate_time(PLUS_INF)


def test_time_rejects_negatives_and_non_ints():
    with pytest.raises(InvalidArgument):
        validate_time(-1)
    with pytest.raises(InvalidArgument):
        validate_time(1.5)
    with pytest.raises(InvalidArgument):
        validate_time(2**64)


def test_parse_time_literals():
    assert parse_time("-inf") == MINUS_INF
    assert parse_time("+inf") == PLUS_INF
    assert parse_time("inf") == PLUS_INF
    assert parse_time("12345") == 12345


def test_format_time_roundtrip():
    for t in (MINUS_INF, 1, 86400, PLUS_INF):
        assert parse_time(format_time(t)) == t


def test_parse_time_rejects_garbage():
    for text in ("", "abc", "1.5", "-2"):
        with pytest.raises(InvalidArgument):
            parse_time(text)


# ------------------------------------------------------------------ intervals

def test_interval_is_half_open():
    iv = ValidityInterval(10, 20)
    assert iv.contains(10)
    assert iv.contains(19)
    assert not iv.contains(20)
    assert not iv.contains(9)


def test_interval_requires_since_before_till():
    with pytest.raises(InvalidInterval):
        ValidityInterval(10, 10)
    with pytest.raises(InvalidInterval):
        ValidityInterval(20, 10)


def test_interval_full_axis_allowed():
    iv = ValidityInterval(MINUS_INF, PLUS_INF)
    assert iv.contains(0)
    assert iv.contains(PLUS_INF - 1)
    assert not iv.contains(PLUS_INF)


def test_interval_overlap_excludes_touching():
    a = ValidityInterval(0, 10)
    b = ValidityInterval(10, 20)
    c = ValidityInterval(9, 11)
    assert not a.overlaps(b)
    assert a.overlaps(c)
    assert c.overlaps(b)


# ---------------------------------------------------------------------- paths

def test_path_parsing_and_rendering():
    p = parse_path("/a/b/c")
    assert p.render() == "/a/b/c"
    assert p.name == "c"
    assert p.parent().render() == "/a/b"
    assert parse_path("/").is_root


def test_path_child():
    p = parse_path("/a")
    assert p.child("b").render() == "/a/b"


def test_path_rejects_relative_and_empty_segments():
    for text in ("a/b", "", "/a//b", "/a/", "/a b", "/a/$x"):
        with pytest.raises(InvalidPath):
            parse_path(text)


def test_root_has_no_parent():
    root = parse_path("/")
    assert root.render() == "/"
    with pytest.raises(InvalidPath):
        root.parent()


# -------------------------------------------------------------------- schemas

def test_schema_roundtrip_through_text():
    s = make_schema([("t0", "float32"), ("flags", "int32"), ("blob0", "blob")])
    assert parse_schema(s.render()) == s
    assert len(s) == 3


def test_schema_rejects_duplicates_and_empty():
    with pytest.raises(InvalidSchema):
        make_schema([("x", "int32"), ("x", "int64")])
    with pytest.raises(InvalidSchema):
        PayloadSchema(())
    with pytest.raises(InvalidSchema):
        make_schema([("x", "int13")])
    with pytest.raises(InvalidSchema):
        parse_schema("no-kind-here")


def test_array_kinds_know_their_element():
    k = AttrKind.ARRAY_FLOAT64
    assert k.is_array
    assert k.element_kind is AttrKind.FLOAT64
    assert not AttrKind.INT32.is_array
    with pytest.raises(InvalidArgument):
        AttrKind.INT32.element_kind


# ------------------------------------------------------------------- payloads

SCHEMA = make_schema([
    ("flag", "bool"),
    ("n", "int32"),
    ("big", "int64"),
    ("x", "float32"),
    ("y", "float64"),
    ("label", "string"),
    ("raw", "blob"),
    ("xs", "array-of-float64"),
])

GOOD = (True, 7, 2**40, 1.5, 2.25, "hello", b"\x00\x01", [1.0, 2.0])


def test_positional_payload_validates():
    out = validate_payload(SCHEMA, GOOD)
    assert out[:7] == GOOD[:7]
    assert out[7] == (1.0, 2.0)


def test_mapping_payload_maps_by_attribute_name():
    by_name = {
        "label": "hello", "raw": b"\x00\x01", "flag": True, "n": 7,
        "big": 2**40, "x": 1.5, "y": 2.25, "xs": [1.0, 2.0],
    }
    assert validate_payload(SCHEMA, by_name) == validate_payload(SCHEMA, GOOD)


def test_mapping_payload_rejects_unknown_and_missing_names():
    with pytest.raises(SchemaMismatch):
        validate_payload(SCHEMA, {**dict(zip([a for a, _ in SCHEMA.attributes], GOOD)), "bogus": 1})
    short = dict(zip([a for a, _ in SCHEMA.attributes], GOOD))
    del short["y"]
    with pytest.raises(SchemaMismatch):
        validate_payload(SCHEMA, short)


def test_payload_arity_must_match():
    with pytest.raises(SchemaMismatch):
        validate_payload(SCHEMA, GOOD[:-1])
    with pytest.raises(SchemaMismatch):
        validate_payload(SCHEMA, GOOD + (0,))


def test_bool_is_not_an_int():
    schema = make_schema([("n", "int32")])
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, (True,))


def test_int_range_checks():
    schema = make_schema([("n", "int32"), ("m", "int64")])
    validate_payload(schema, (2**31 - 1, -(2**63)))
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, (2**31, 0))
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, (0, 2**63))


def test_float32_rounds_at_validation_time():
    # storage width is 32 bits; the oracle is the packed round-trip
    expected = struct.unpack("<f", struct.pack("<f", 0.1))[0]
    schema = make_schema([("x", "float32")])
    assert validate_payload(schema, (0.1,)) == (expected,)


def test_float32_overflow_becomes_infinity():
    schema = make_schema([("x", "float32")])
    assert validate_payload(schema, (1e39,)) == (float("inf"),)
    assert validate_payload(schema, (-1e39,)) == (float("-inf"),)


def test_float_accepts_ints_and_keeps_nan():
    schema = make_schema([("y", "float64")])
    assert validate_payload(schema, (3,)) == (3.0,)
    (out,) = validate_payload(schema, (float("nan"),))
    assert math.isnan(out)


def test_blob_normalizes_bytearray():
    schema = make_schema([("raw", "blob")])
    (out,) = validate_payload(schema, (bytearray(b"ab"),))
    assert out == b"ab" and isinstance(out, bytes)


def test_array_payloads_check_elements():
    schema = make_schema([("xs", "array-of-int32")])
    assert validate_payload(schema, ([1, 2, 3],)) == ((1, 2, 3),)
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, ([1, "two"],))
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, (1,))


def test_string_kind_rejects_bytes():
    schema = make_schema([("label", "string")])
    with pytest.raises(SchemaMismatch):
        validate_payload(schema, (b"hi",))


# ---------------------------------------------------------- partition policies

def test_partition_policy_grammar():
    assert parse_partition_policy("none") == PartitionPolicy()
    assert parse_partition_policy("time:86400") == PartitionPolicy(PartitionAxis.TIME, 86400)
    assert parse_partition_policy("version:4096") == PartitionPolicy(PartitionAxis.VERSION, 4096)


def test_partition_policy_renders_back():
    for text in ("none", "time:3600", "version:512"):
        assert parse_partition_policy(text).render() == text


def test_partition_policy_rejects_bad_chunks():
    with pytest.raises(InvalidArgument):
        parse_partition_policy("time:0")
    with pytest.raises(InvalidArgument):
        parse_partition_policy("sideways:8")
    with pytest.raises(InvalidArgument):
        PartitionPolicy(PartitionAxis.NONE, 5)
    with pytest.raises(InvalidArgument):
        PartitionPolicy(PartitionAxis.TIME, -1)
