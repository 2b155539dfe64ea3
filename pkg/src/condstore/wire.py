"""Binary record encoding for the file backend and partition chunk files.

Framing: every log record is ``u32 length | u8 kind | body | u32 crc`` where
length = len(kind+body) and crc = CRC32(kind+body). All integers are
little-endian. Strings are u32-length-prefixed UTF-8; arrays/blobs are
u32-count-prefixed. A torn final record fails its CRC (or runs out of bytes)
and is truncated on recovery.
"""

from __future__ import annotations

import struct
import zlib
from io import BytesIO

from .errors import CorruptStore
from .model import (
    AttrKind,
    PartitionAxis,
    PartitionPolicy,
    PayloadSchema,
    make_schema,
)

MANIFEST_MAGIC = b"CDBS"
CHUNK_MAGIC = b"CDBC"
INDEX_MAGIC = b"CDBI"
FORMAT_VERSION = 1

# record kinds
REC_FOLDERSET = 1
REC_FOLDER = 2
REC_TAG = 3
REC_COMMIT = 4
REC_CHECKPOINT = 5
REC_EVICT = 6
REC_IMPORT = 7
REC_OBJECT = 16

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I32 = struct.Struct("<i")
_I64 = struct.Struct("<q")
_F32 = struct.Struct("<f")
_F64 = struct.Struct("<d")

_KIND_CODES = {
    AttrKind.BOOL: 0,
    AttrKind.INT32: 1,
    AttrKind.INT64: 2,
    AttrKind.FLOAT32: 3,
    AttrKind.FLOAT64: 4,
    AttrKind.STRING: 5,
    AttrKind.BLOB: 6,
    AttrKind.ARRAY_INT32: 7,
    AttrKind.ARRAY_INT64: 8,
    AttrKind.ARRAY_FLOAT32: 9,
    AttrKind.ARRAY_FLOAT64: 10,
}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}


class Writer:
    """Accumulates little-endian fields into bytes."""

    def __init__(self):
        self._buf = BytesIO()

    def u8(self, v: int):
        self._buf.write(bytes([v]))

    def u16(self, v: int):
        self._buf.write(_U16.pack(v))

    def u32(self, v: int):
        self._buf.write(_U32.pack(v))

    def u64(self, v: int):
        self._buf.write(_U64.pack(v))

    def i32(self, v: int):
        self._buf.write(_I32.pack(v))

    def i64(self, v: int):
        self._buf.write(_I64.pack(v))

    def f32(self, v: float):
        self._buf.write(_F32.pack(v))

    def f64(self, v: float):
        self._buf.write(_F64.pack(v))

    def string(self, s: str):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self._buf.write(raw)

    def blob(self, b: bytes):
        self.u32(len(b))
        self._buf.write(b)

    def raw(self, b: bytes):
        self._buf.write(b)

    def getvalue(self) -> bytes:
        return self._buf.getvalue()


class Reader:
    """Cursor over bytes; raises CorruptStore on underrun."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def _take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise CorruptStore("record body truncated")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def i32(self) -> int:
        return _I32.unpack(self._take(4))[0]

    def i64(self) -> int:
        return _I64.unpack(self._take(8))[0]

    def f32(self) -> float:
        return _F32.unpack(self._take(4))[0]

    def f64(self) -> float:
        return _F64.unpack(self._take(8))[0]

    def string(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")

    def blob(self) -> bytes:
        return self._take(self.u32())

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


def frame_record(kind: int, body: bytes) -> bytes:
    payload = bytes([kind]) + body
    return _U32.pack(len(payload)) + payload + _U32.pack(zlib.crc32(payload))


def iter_records(data: bytes, offset: int = 0):
    """Yield (kind, body, end_offset) for intact records; stop at a torn tail.

    Returns normally at the first record whose framing or CRC is invalid; the
    caller treats everything from that point on as a discarded tail.
    """
    pos = offset
    total = len(data)
    while pos + 4 <= total:
        (length,) = _U32.unpack(data[pos:pos + 4])
        end = pos + 4 + length + 4
        if length < 1 or end > total:
            return
        payload = data[pos + 4:pos + 4 + length]
        (crc,) = _U32.unpack(data[pos + 4 + length:end])
        if zlib.crc32(payload) != crc:
            return
        yield payload[0], payload[1:], end
        pos = end


def encode_schema(w: Writer, schema: PayloadSchema):
    w.u32(len(schema.attributes))
    for name, kind in schema.attributes:
        w.string(name)
        w.u8(_KIND_CODES[kind])


def decode_schema(r: Reader) -> PayloadSchema:
    count = r.u32()
    attrs = []
    for _ in range(count):
        name = r.string()
        code = r.u8()
        if code not in _KIND_FROM_CODE:
            raise CorruptStore(f"unknown attribute kind code {code}")
        attrs.append((name, _KIND_FROM_CODE[code]))
    return make_schema(attrs)


def encode_policy(w: Writer, policy: PartitionPolicy):
    axis = {PartitionAxis.NONE: 0, PartitionAxis.TIME: 1, PartitionAxis.VERSION: 2}[policy.axis]
    w.u8(axis)
    w.u64(policy.chunk)


def decode_policy(r: Reader) -> PartitionPolicy:
    axis = r.u8()
    chunk = r.u64()
    if axis == 0:
        return PartitionPolicy()
    if axis == 1:
        return PartitionPolicy(PartitionAxis.TIME, chunk)
    if axis == 2:
        return PartitionPolicy(PartitionAxis.VERSION, chunk)
    raise CorruptStore(f"unknown partition axis code {axis}")


def encode_values(w: Writer, schema: PayloadSchema, values: tuple):
    for (_, kind), value in zip(schema.attributes, values):
        if kind is AttrKind.BOOL:
            w.u8(1 if value else 0)
        elif kind is AttrKind.INT32:
            w.i32(value)
        elif kind is AttrKind.INT64:
            w.i64(value)
        elif kind is AttrKind.FLOAT32:
            w.f32(value)
        elif kind is AttrKind.FLOAT64:
            w.f64(value)
        elif kind is AttrKind.STRING:
            w.string(value)
        elif kind is AttrKind.BLOB:
            w.blob(value)
        else:
            w.u32(len(value))
            elem = kind.element_kind
            for v in value:
                if elem is AttrKind.INT32:
                    w.i32(v)
                elif elem is AttrKind.INT64:
                    w.i64(v)
                elif elem is AttrKind.FLOAT32:
                    w.f32(v)
                else:
                    w.f64(v)


def decode_values(r: Reader, schema: PayloadSchema) -> tuple:
    out = []
    for _, kind in schema.attributes:
        if kind is AttrKind.BOOL:
            out.append(bool(r.u8()))
        elif kind is AttrKind.INT32:
            out.append(r.i32())
        elif kind is AttrKind.INT64:
            out.append(r.i64())
        elif kind is AttrKind.FLOAT32:
            out.append(r.f32())
        elif kind is AttrKind.FLOAT64:
            out.append(r.f64())
        elif kind is AttrKind.STRING:
            out.append(r.string())
        elif kind is AttrKind.BLOB:
            out.append(r.blob())
        else:
            n = r.u32()
            elem = kind.element_kind
            vals = []
            for _ in range(n):
                if elem is AttrKind.INT32:
                    vals.append(r.i32())
                elif elem is AttrKind.INT64:
                    vals.append(r.i64())
                elif elem is AttrKind.FLOAT32:
                    vals.append(r.f32())
                else:
                    vals.append(r.f64())
            out.append(tuple(vals))
    return tuple(out)


def encode_object_record(schema: PayloadSchema, seq: int, since: int, till: int, values: tuple) -> bytes:
    w = Writer()
    w.u64(seq)
    w.u64(since)
    w.u64(till)
    encode_values(w, schema, values)
    return frame_record(REC_OBJECT, w.getvalue())


def decode_object_body(body: bytes, schema: PayloadSchema):
    r = Reader(body)
    seq = r.u64()
    since = r.u64()
    till = r.u64()
    values = decode_values(r, schema)
    return seq, since, till, values
