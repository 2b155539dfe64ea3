"""Domain vocabulary: validity time axis, intervals, folder paths, payload schemas.

All types here are immutable values with no storage behaviour. The time axis is
an abstract, unit-free unsigned 64-bit tick count; tick 0 and tick 2^64-1 are
reserved as the -inf / +inf sentinels, so every ordinary point lies strictly
between them. Intervals are half-open [since, till).
"""

from __future__ import annotations

import re
import struct as _struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidArgument, InvalidInterval, InvalidPath, InvalidSchema, SchemaMismatch

MINUS_INF = 0
PLUS_INF = 2**64 - 1

_SEGMENT_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

_I32_MIN, _I32_MAX = -(2**31), 2**31 - 1
_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1


def validate_time(t: int, *, what: str = "time point") -> int:
    """Check a point on the validity axis; +inf is outside every interval."""
    if not isinstance(t, int) or isinstance(t, bool):
        raise InvalidArgument(f"{what} must be an integer tick count, got {t!r}")
    if t < MINUS_INF or t > PLUS_INF:
        raise InvalidArgument(f"{what} {t} outside the 64-bit validity axis")
    if t == PLUS_INF:
        raise InvalidArgument(f"{what} may not be the +inf sentinel")
    return t


def parse_time(text: str) -> int:
    """Parse a tick count; accepts the literals '-inf' and '+inf'."""
    text = text.strip()
    if text == "-inf":
        return MINUS_INF
    if text in ("+inf", "inf"):
        return PLUS_INF
    try:
        value = int(text, 0)
    except ValueError:
        raise InvalidArgument(f"bad time literal {text!r}") from None
    if value < MINUS_INF or value > PLUS_INF:
        raise InvalidArgument(f"time {value} outside the 64-bit validity axis")
    return value


def format_time(t: int) -> str:
    if t == MINUS_INF:
        return "-inf"
    if t == PLUS_INF:
        return "+inf"
    return str(t)


@dataclass(frozen=True)
class ValidityInterval:
    """Half-open [since, till) span on the validity axis; since < till strictly."""

    since: int
    till: int

    def __post_init__(self):
        s, t = self.since, self.till
        for v, what in ((s, "since"), (t, "till")):
            if not isinstance(v, int) or isinstance(v, bool) or v < MINUS_INF or v > PLUS_INF:
                raise InvalidInterval(f"{what} {v!r} is not a point on the validity axis")
        if s >= t:
            raise InvalidInterval(f"empty or inverted interval [{s}, {t})")
        if s == PLUS_INF:
            raise InvalidInterval("since may not be +inf")
        # till == MINUS_INF is impossible once s < t holds

    def contains(self, t: int) -> bool:
        return self.since <= t < self.till

    def overlaps(self, other: "ValidityInterval") -> bool:
        return max(self.since, other.since) < min(self.till, other.till)

    def __str__(self) -> str:
        return f"[{format_time(self.since)}, {format_time(self.till)})"


def interval_overlaps(a: ValidityInterval, b: ValidityInterval) -> bool:
    return a.overlaps(b)


@dataclass(frozen=True)
class FolderPath:
    """Canonical folder identity: "/" + segments joined by "/"; root has none."""

    segments: tuple[str, ...]

    def __post_init__(self):
        for seg in self.segments:
            if not _SEGMENT_RE.match(seg):
                raise InvalidPath(f"bad path segment {seg!r}")

    @property
    def is_root(self) -> bool:
        return not self.segments

    @property
    def name(self) -> str:
        return self.segments[-1] if self.segments else "/"

    def parent(self) -> "FolderPath":
        if self.is_root:
            raise InvalidPath("root has no parent")
        return FolderPath(self.segments[:-1])

    def child(self, name: str) -> "FolderPath":
        return FolderPath(self.segments + (name,))

    def render(self) -> str:
        return "/" + "/".join(self.segments)

    def __str__(self) -> str:
        return self.render()


ROOT = FolderPath(())


def parse_path(text: str) -> FolderPath:
    """Parse canonical path text; inverse of FolderPath.render for valid paths."""
    if not isinstance(text, str) or not text:
        raise InvalidPath("empty path")
    if not text.startswith("/"):
        raise InvalidPath(f"path {text!r} must start with '/'")
    if text == "/":
        return ROOT
    if text.endswith("/"):
        raise InvalidPath(f"path {text!r} has a trailing '/'")
    segments = text[1:].split("/")
    for seg in segments:
        if not seg:
            raise InvalidPath(f"path {text!r} has an empty segment")
        if seg in (".", ".."):
            raise InvalidPath(f"path {text!r} contains {seg!r}")
        if not _SEGMENT_RE.match(seg):
            raise InvalidPath(f"path {text!r}: bad segment {seg!r}")
    return FolderPath(tuple(segments))


def as_path(path: "FolderPath | str") -> FolderPath:
    return path if isinstance(path, FolderPath) else parse_path(path)


class AttrKind(str, Enum):
    BOOL = "bool"
    INT32 = "int32"
    INT64 = "int64"
    FLOAT32 = "float32"
    FLOAT64 = "float64"
    STRING = "string"
    BLOB = "blob"
    ARRAY_INT32 = "array-of-int32"
    ARRAY_INT64 = "array-of-int64"
    ARRAY_FLOAT32 = "array-of-float32"
    ARRAY_FLOAT64 = "array-of-float64"

    @property
    def is_array(self) -> bool:
        return self.value.startswith("array-of-")

    @property
    def element_kind(self) -> "AttrKind":
        if not self.is_array:
            raise InvalidArgument(f"{self.value} is not an array kind")
        return AttrKind(self.value[len("array-of-"):])


@dataclass(frozen=True)
class PayloadSchema:
    """Ordered attribute list; frozen per folder at creation."""

    attributes: tuple[tuple[str, AttrKind], ...]

    def __post_init__(self):
        if not self.attributes:
            raise InvalidSchema("schema needs at least one attribute")
        seen = set()
        for name, kind in self.attributes:
            if not _SEGMENT_RE.match(name):
                raise InvalidSchema(f"bad attribute name {name!r}")
            if name in seen:
                raise InvalidSchema(f"duplicate attribute name {name!r}")
            seen.add(name)
            if not isinstance(kind, AttrKind):
                raise InvalidSchema(f"bad attribute kind {kind!r}")

    def __len__(self) -> int:
        return len(self.attributes)

    def render(self) -> str:
        return ",".join(f"{name}:{kind.value}" for name, kind in self.attributes)

    def __str__(self) -> str:
        return self.render()


def make_schema(attributes) -> PayloadSchema:
    """Build a schema from (name, kind-or-kind-string) pairs."""
    attrs = []
    for name, kind in attributes:
        if not isinstance(kind, AttrKind):
            try:
                kind = AttrKind(kind)
            except ValueError:
                raise InvalidSchema(f"unknown attribute kind {kind!r}") from None
        attrs.append((name, kind))
    return PayloadSchema(tuple(attrs))


def parse_schema(text: str) -> PayloadSchema:
    """Parse the ``name:kind(,name:kind)*`` schema grammar used by the CLI."""
    if not text:
        raise InvalidSchema("empty schema")
    attrs = []
    for part in text.split(","):
        name, sep, kind = part.partition(":")
        if not sep:
            raise InvalidSchema(f"bad schema entry {part!r} (expected name:kind)")
        attrs.append((name.strip(), kind.strip()))
    return make_schema(attrs)


def _check_scalar(kind: AttrKind, value, position: int):
    if kind is AttrKind.BOOL:
        if not isinstance(value, bool):
            raise SchemaMismatch(f"position {position}: expected bool, got {value!r}", position)
        return value
    if kind in (AttrKind.INT32, AttrKind.INT64):
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaMismatch(f"position {position}: expected {kind.value}, got {value!r}", position)
        lo, hi = (_I32_MIN, _I32_MAX) if kind is AttrKind.INT32 else (_I64_MIN, _I64_MAX)
        if not lo <= value <= hi:
            raise SchemaMismatch(f"position {position}: {value} out of {kind.value} range", position)
        return value
    if kind in (AttrKind.FLOAT32, AttrKind.FLOAT64):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaMismatch(f"position {position}: expected {kind.value}, got {value!r}", position)
        value = float(value)
        if kind is AttrKind.FLOAT32:
            # stored width is 32 bits; round now so reads never change on reload
            try:
                value = _struct.unpack("<f", _struct.pack("<f", value))[0]
            except OverflowError:
                value = float("inf") if value > 0 else float("-inf")
        return value
    if kind is AttrKind.STRING:
        if not isinstance(value, str):
            raise SchemaMismatch(f"position {position}: expected string, got {value!r}", position)
        return value
    if kind is AttrKind.BLOB:
        if not isinstance(value, (bytes, bytearray)):
            raise SchemaMismatch(f"position {position}: expected blob, got {value!r}", position)
        return bytes(value)
    raise SchemaMismatch(f"position {position}: unhandled kind {kind}", position)


def validate_payload(schema: PayloadSchema, values) -> tuple:
    """Check arity and per-position kinds; returns the normalized value tuple.

    Accepts a mapping keyed by attribute name or a positional sequence.
    Reports the first offending position. Array attributes are variable-length
    (empty permitted); elements are checked against the element kind.
    """
    if isinstance(values, Mapping):
        names = [name for name, _ in schema.attributes]
        extra = set(values) - set(names)
        if extra:
            raise SchemaMismatch(f"unknown attribute {sorted(extra)[0]!r}")
        missing = [n for n in names if n not in values]
        if missing:
            raise SchemaMismatch(f"missing attribute {missing[0]!r}")
        values = tuple(values[n] for n in names)
    else:
        values = tuple(values)
    if len(values) != len(schema.attributes):
        raise SchemaMismatch(
            f"arity mismatch: schema has {len(schema.attributes)} attributes, value has {len(values)}"
        )
    out = []
    for i, ((_, kind), value) in enumerate(zip(schema.attributes, values)):
        if kind.is_array:
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise SchemaMismatch(f"position {i}: expected {kind.value}, got {value!r}", i)
            elem = kind.element_kind
            out.append(tuple(_check_scalar(elem, v, i) for v in value))
        else:
            out.append(_check_scalar(kind, value, i))
    return tuple(out)


class FolderKind(str, Enum):
    FOLDERSET = "folderset"
    FOLDER = "folder"
    TINY = "tiny-folder"


class StoreStrategy(str, Enum):
    LAYERED = "layered"
    LEGACY_TRUNCATE = "legacy"


class PartitionAxis(str, Enum):
    NONE = "none"
    TIME = "time"
    VERSION = "version"


@dataclass(frozen=True)
class PartitionPolicy:
    """Intra-folder partitioning rule, frozen at folder creation."""

    axis: PartitionAxis = PartitionAxis.NONE
    chunk: int = 0

    def __post_init__(self):
        if not isinstance(self.axis, PartitionAxis):
            object.__setattr__(self, "axis", PartitionAxis(self.axis))
        if self.axis is PartitionAxis.NONE:
            if self.chunk:
                raise InvalidArgument("axis 'none' takes no chunk extent")
        elif not isinstance(self.chunk, int) or self.chunk <= 0:
            raise InvalidArgument(f"partition chunk must be a positive extent, got {self.chunk!r}")

    def render(self) -> str:
        if self.axis is PartitionAxis.NONE:
            return "none"
        return f"{self.axis.value}:{self.chunk}"


NO_PARTITION = PartitionPolicy()


def parse_partition_policy(text: str) -> PartitionPolicy:
    """Parse ``none`` | ``time:CHUNK`` | ``version:CHUNK``."""
    text = text.strip()
    if text in ("", "none"):
        return NO_PARTITION
    axis, sep, chunk = text.partition(":")
    if not sep:
        raise InvalidArgument(f"bad partition policy {text!r} (expected axis:chunk)")
    try:
        axis_v = PartitionAxis(axis.strip())
    except ValueError:
        raise InvalidArgument(f"unknown partition axis {axis!r}") from None
    if axis_v is PartitionAxis.NONE:
        raise InvalidArgument("axis 'none' takes no chunk extent")
    try:
        chunk_v = int(chunk, 0)
    except ValueError:
        raise InvalidArgument(f"bad chunk extent {chunk!r}") from None
    return PartitionPolicy(axis_v, chunk_v)


@dataclass(frozen=True)
class FolderNode:
    """Catalog node: a folderset (interior) or a data/tiny folder (leaf)."""

    path: FolderPath
    kind: FolderKind
    description: str = ""
    schema: PayloadSchema | None = None
    policy: PartitionPolicy = NO_PARTITION
    strategy: StoreStrategy | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind is not FolderKind.FOLDERSET


@dataclass(frozen=True)
class CondObject:
    """One committed payload: stored interval, insertion sequence, values."""

    folder: FolderPath
    interval: ValidityInterval
    seq: int
    values: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class ResolvedObject:
    """find/browse result: the winning object plus its effective interval.

    ``effective`` is the maximal span around the query point over which this
    same object stays the answer under the used selector, so callers may cache
    the value across it.
    """

    folder: FolderPath
    seq: int
    stored: ValidityInterval
    effective: ValidityInterval
    values: tuple


@dataclass(frozen=True)
class TagSnapshot:
    """Named, immutable per-folder sequence ceilings."""

    name: str
    entries: tuple[tuple[FolderPath, int], ...]
    created_at: int  # wall clock, UNIX nanoseconds

    def ceiling(self, path: FolderPath) -> int | None:
        for p, seq in self.entries:
            if p == path:
                return seq
        return None
