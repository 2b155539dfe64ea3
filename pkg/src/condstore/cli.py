"""Command-line front end.

One operation per invocation against a store directory (``--store`` or the
CONDDB_STORE environment variable), plus ``apply`` for bulk JSON-lines input
and ``dump`` for a canonical full-state export. Read commands open the store
read-only so they never contend for the writer lock.

Output is either aligned text (``--format table``, default) or JSON lines
(``--format records``). Ticks are printed as strings: they are unsigned
64-bit values and JSON consumers with double-width numbers would mangle
them. Exit codes: 0 success, 1 store/domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import open_store
from .errors import CondStoreError, InvalidArgument
from .model import (
    MINUS_INF,
    PLUS_INF,
    AttrKind,
    FolderKind,
    format_time,
    parse_partition_policy,
    parse_schema,
    parse_time,
)

_READ_COMMANDS = {
    "ls", "describe", "find", "browse", "tags", "tiny-read", "tiny-scan",
    "export-part", "residency", "stats", "dump",
}


# ---------------------------------------------------------------- rendering

def _tick(t: int) -> str:
    return str(t)


def _value_out(kind: AttrKind, value):
    if kind is AttrKind.BLOB:
        return "0x" + value.hex()
    if kind.is_array:
        return [_value_out(kind.element_kind, v) for v in value]
    return value


def _values_out(schema, values):
    return [_value_out(kind, v) for (_, kind), v in zip(schema.attributes, values)]


def _value_in(kind: AttrKind, raw, position: int):
    if kind is AttrKind.BLOB:
        if not isinstance(raw, str) or not raw.startswith("0x"):
            raise InvalidArgument(f"value {position}: blobs are 0x-prefixed hex strings")
        try:
            return bytes.fromhex(raw[2:])
        except ValueError:
            raise InvalidArgument(f"value {position}: bad hex in blob") from None
    if kind.is_array:
        if not isinstance(raw, list):
            raise InvalidArgument(f"value {position}: expected a JSON array")
        return [_value_in(kind.element_kind, v, position) for v in raw]
    return raw


def _values_in(schema, text: str):
    """Parse a JSON array or object of payload values against the schema."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"bad values JSON: {exc}") from None
    attrs = schema.attributes
    if isinstance(raw, dict):
        names = [n for n, _ in attrs]
        raw = [raw.get(n) for n in names]
    if not isinstance(raw, list) or len(raw) != len(attrs):
        raise InvalidArgument(f"values must list all {len(attrs)} attributes in order")
    return tuple(_value_in(kind, v, i) for i, ((_, kind), v) in enumerate(zip(attrs, raw)))


def _obj_record(store, obj) -> dict:
    schema = store.describe_folder(obj.folder).schema
    return {
        "folder": str(obj.folder),
        "seq": obj.seq,
        "since": _tick(obj.stored.since),
        "till": _tick(obj.stored.till),
        "effective_since": _tick(obj.effective.since),
        "effective_till": _tick(obj.effective.till),
        "values": _values_out(schema, obj.values),
    }


def _emit(args, record: dict, table_line: str):
    if args.format == "records":
        print(json.dumps(record, ensure_ascii=False))
    else:
        print(table_line)


def _obj_line(obj) -> str:
    vals = ", ".join(repr(v) for v in obj.values)
    return (
        f"seq {obj.seq}  [{format_time(obj.stored.since)}, {format_time(obj.stored.till)})"
        f"  effective [{format_time(obj.effective.since)}, {format_time(obj.effective.till)})"
        f"  values ({vals})"
    )


# ---------------------------------------------------------------- commands

def _cmd_init(store, args):
    # the open itself created the directory
    print(f"initialized store at {args.store}")


def _cmd_mkset(store, args):
    store.create_folderset(args.path, description=args.description)
    print(f"created folderset {args.path}")


def _cmd_mkfolder(store, args):
    policy = parse_partition_policy(args.partition) if args.partition else None
    store.create_folder(
        args.path,
        schema=parse_schema(args.schema),
        strategy=args.strategy,
        policy=policy,
        description=args.description,
    )
    print(f"created folder {args.path}")


def _cmd_mktiny(store, args):
    policy = parse_partition_policy(args.partition) if args.partition else None
    store.create_tiny_folder(
        args.path, value_kind=args.kind, policy=policy, description=args.description
    )
    print(f"created tiny folder {args.path}")


def _cmd_ls(store, args):
    if args.recursive:
        for node, depth in store.walk(args.path):
            name = str(node.path)
            if args.format == "records":
                print(json.dumps({"path": name, "kind": node.kind.value}))
            else:
                print("  " * depth + (name if depth == 0 else name.rsplit("/", 1)[-1]))
    else:
        for node in store.list_children(args.path):
            if args.format == "records":
                print(json.dumps({"path": str(node.path), "kind": node.kind.value}))
            else:
                suffix = "/" if node.kind is FolderKind.FOLDERSET else ""
                print(str(node.path).rsplit("/", 1)[-1] + suffix)


def _cmd_describe(store, args):
    info = store.describe_folder(args.path)
    record = {
        "path": str(info.path),
        "kind": info.kind.value,
        "description": info.description,
        "schema": info.schema.render() if info.schema else None,
        "strategy": info.strategy.value if info.strategy else None,
        "policy": info.policy.render() if info.policy else None,
        "count": info.count,
        "max_seq": info.max_seq,
    }
    if args.format == "records":
        print(json.dumps(record, ensure_ascii=False))
    else:
        for key, value in record.items():
            print(f"{key:12} {value if value is not None else '-'}")


def _cmd_store(store, args):
    schema = store.describe_folder(args.path).schema
    if schema is None:
        raise InvalidArgument(f"{args.path} does not take objects")
    values = _values_in(schema, args.values)
    with store.update() as up:
        seq = up.store_object(args.path, parse_time(args.since), parse_time(args.till), values)
    _emit(args, {"seq": seq}, f"stored seq {seq}")


def _cmd_find(store, args):
    obj = store.find_object(
        args.path, parse_time(args.at), tag=args.tag, at_seq=args.seq
    )
    _emit(args, _obj_record(store, obj), _obj_line(obj))


def _cmd_browse(store, args):
    for obj in store.browse_objects(
        args.path, parse_time(getattr(args, "from")), parse_time(args.to),
        tag=args.tag, at_seq=args.seq,
    ):
        _emit(args, _obj_record(store, obj), _obj_line(obj))


def _cmd_tag_head(store, args):
    tag = store.tag_head(args.name, args.paths)
    record = {"name": tag.name, "entries": [(str(p), s) for p, s in tag.entries]}
    _emit(args, record, f"tagged {len(tag.entries)} folder(s) as {tag.name!r}")


def _cmd_tag_at(store, args):
    entries = []
    for item in args.entries:
        path, _, seq = item.rpartition("=")
        if not path:
            raise InvalidArgument(f"bad entry {item!r}; use /path=SEQ")
        entries.append((path, int(seq)))
    tag = store.tag_at_sequence(args.name, entries)
    record = {"name": tag.name, "entries": [(str(p), s) for p, s in tag.entries]}
    _emit(args, record, f"tagged {len(tag.entries)} folder(s) as {tag.name!r}")


def _cmd_tags(store, args):
    for tag in store.list_tags():
        record = {"name": tag.name, "entries": [(str(p), s) for p, s in tag.entries]}
        if args.format == "records":
            print(json.dumps(record, ensure_ascii=False))
        else:
            pairs = ", ".join(f"{p}@{s}" for p, s in record["entries"])
            print(f"{tag.name}: {pairs}")


def _cmd_tiny_append(store, args):
    value = json.loads(args.value)
    with store.update() as up:
        up.tiny_append(args.path, parse_time(args.at), value)
    print("appended")


def _cmd_tiny_read(store, args):
    reading = store.tiny_read(args.path, parse_time(args.at))
    record = {
        "at": _tick(reading.at),
        "value": reading.value,
        "effective_since": _tick(reading.effective.since),
        "effective_till": _tick(reading.effective.till),
    }
    _emit(
        args, record,
        f"at {reading.at}: {reading.value!r}  effective "
        f"[{format_time(reading.effective.since)}, {format_time(reading.effective.till)})",
    )


def _cmd_tiny_scan(store, args):
    for ts, value in store.tiny_scan(
        args.path, parse_time(getattr(args, "from")), parse_time(args.to)
    ):
        _emit(args, {"at": _tick(ts), "value": value}, f"{ts}\t{value!r}")


def _cmd_export_part(store, args):
    count = store.export_partition(args.path, args.pidx, args.out)
    _emit(args, {"exported": count}, f"exported {count} item(s) to {args.out}")


def _cmd_evict_part(store, args):
    store.evict_partition(args.path, args.pidx)
    print(f"evicted partition {args.pidx} of {args.path}")


def _cmd_import_part(store, args):
    count = store.import_partition(args.path, args.chunk)
    _emit(args, {"imported": count}, f"imported {count} item(s) into {args.path}")


def _cmd_residency(store, args):
    for pidx, count, resident in store.partition_residency(args.path):
        record = {"pidx": pidx, "count": count, "resident": resident}
        _emit(args, record, f"{pidx}\t{count}\t{'resident' if resident else 'offline'}")


def _cmd_checkpoint(store, args):
    store.checkpoint()
    print("checkpoint written")


def _cmd_stats(store, args):
    stats = store.stats_snapshot()
    if args.format == "records":
        print(json.dumps(stats))
    else:
        for key in sorted(stats):
            print(f"{key:22} {stats[key]}")


def _cmd_apply(store, args):
    """Bulk writes: one JSON op per stdin line, committed per 'commit' op."""
    applied = 0
    schemas = {}  # folders created here, visible before their commit

    def schema_for(path):
        if path in schemas:
            return schemas[path]
        return store.describe_folder(path).schema

    session = store.update()
    try:
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            op = json.loads(line)
            kind = op["op"]
            if kind == "mkset":
                session.create_folderset(op["path"], description=op.get("description", ""))
            elif kind == "mkfolder":
                policy = op.get("policy")
                schema = parse_schema(op["schema"])
                session.create_folder(
                    op["path"],
                    schema=schema,
                    strategy=op.get("strategy", "layered"),
                    policy=parse_partition_policy(policy) if policy else None,
                    description=op.get("description", ""),
                )
                schemas[op["path"]] = schema
            elif kind == "mktiny":
                policy = op.get("policy")
                session.create_tiny_folder(
                    op["path"], value_kind=op.get("kind", "float64"),
                    policy=parse_partition_policy(policy) if policy else None,
                    description=op.get("description", ""),
                )
            elif kind == "store":
                schema = schema_for(op["path"])
                values = tuple(
                    _value_in(k, v, i)
                    for i, ((_, k), v) in enumerate(zip(schema.attributes, op["values"]))
                )
                session.store_object(
                    op["path"], parse_time(str(op["since"])), parse_time(str(op["till"])), values
                )
            elif kind == "tiny":
                session.tiny_append(op["path"], parse_time(str(op["at"])), op["value"])
            elif kind == "commit":
                session.commit()
                session = store.update()
            elif kind == "tag-head":
                session.commit()
                store.tag_head(op["name"], op["paths"])
                session = store.update()
            elif kind == "tag-at":
                session.commit()
                store.tag_at_sequence(op["name"], [(p, s) for p, s in op["entries"]])
                session = store.update()
            else:
                raise InvalidArgument(f"unknown apply op {kind!r}")
            applied += 1
        session.commit()
        session = None
    finally:
        if session is not None:
            session.abort()
    print(f"applied {applied} op(s)")


def _cmd_dump(store, args):
    """Canonical full-state JSON lines: catalog, objects, tags, tiny samples."""
    out = []
    for node, _depth in store.walk():
        if node.path.is_root:
            continue
        entry = {
            "type": "node",
            "path": str(node.path),
            "kind": node.kind.value,
            "description": node.description,
        }
        if node.kind is FolderKind.FOLDER:
            entry["schema"] = node.schema.render()
            entry["strategy"] = node.strategy.value
        elif node.kind is FolderKind.TINY:
            entry["schema"] = node.schema.render()
        out.append(entry)
        if node.kind is FolderKind.FOLDER:
            for obj in store.browse_objects(str(node.path), MINUS_INF, PLUS_INF):
                rec = _obj_record(store, obj)
                rec["type"] = "visible"
                out.append(rec)
        elif node.kind is FolderKind.TINY:
            for ts, value in store.tiny_scan(str(node.path), MINUS_INF, PLUS_INF):
                out.append({
                    "type": "sample", "folder": str(node.path),
                    "at": _tick(ts), "value": value,
                })
    for tag in store.list_tags():
        out.append({
            "type": "tag", "name": tag.name,
            "entries": [(str(p), s) for p, s in tag.entries],
        })
    for entry in out:
        print(json.dumps(entry, ensure_ascii=False))


# ---------------------------------------------------------------- harness

def _cmd_bench(store, args):
    from . import bench

    if args.workload == "matrix":
        results = bench.run_matrix(backend=args.backend, kernel=args.kernel, seed=args.bench_seed)
        print(bench.render_table(results))
        return
    if args.workload == "kernels":
        results = bench.kernel_contrast(args.n, backend=args.backend, seed=args.bench_seed)
        print(bench.render_table(results))
        return
    if args.workload in ("storeA", "storeB"):
        result = bench.bench_store(
            args.workload, args.strategy, args.n,
            backend=args.backend, kernel=args.kernel, seed=args.bench_seed,
        )
    elif args.workload == "readA":
        result = bench.bench_find(
            args.n, backend=args.backend, kernel=args.kernel, seed=args.bench_seed
        )
    elif args.workload == "readB":
        result = bench.bench_browse(
            args.n, backend=args.backend, kernel=args.kernel, seed=args.bench_seed
        )
    elif args.workload == "tiny":
        result, per_sample = bench.bench_tiny_append(
            args.n, backend=args.backend, kernel=args.kernel, seed=args.bench_seed
        )
        print(result.HEADER)
        print(result.row())
        print(f"disk bytes/sample: {per_sample:.2f}")
        return
    else:
        raise InvalidArgument(f"unknown workload {args.workload!r}")
    print(result.HEADER)
    print(result.row())


def _cmd_conformance(store, args):
    from .conformance import FileFactory, MemoryFactory, run_pair

    seeds = range(args.seed0, args.seed0 + args.seeds)
    if args.pair == "memory-file":
        report = run_pair(
            MemoryFactory(), FileFactory(), seeds=seeds,
            ops_per_seed=args.ops, pair_name=args.pair,
        )
    elif args.pair == "kernels":
        report = run_pair(
            MemoryFactory(kernel="pure"), MemoryFactory(kernel="compiled"),
            seeds=seeds, ops_per_seed=args.ops, pair_name=args.pair,
        )
    elif args.pair == "partition":
        report = run_pair(
            MemoryFactory(), MemoryFactory(policy_map=lambda p: None),
            seeds=seeds, ops_per_seed=args.ops, partition_ops=False,
            valid_policies_only=True, pair_name=args.pair,
        )
    else:
        raise InvalidArgument(f"unknown pair {args.pair!r}")
    print(report.render())
    if not report.ok:
        sys.exit(1)


_HANDLERS = {
    "init": _cmd_init,
    "mkset": _cmd_mkset,
    "mkfolder": _cmd_mkfolder,
    "mktiny": _cmd_mktiny,
    "ls": _cmd_ls,
    "describe": _cmd_describe,
    "store": _cmd_store,
    "find": _cmd_find,
    "browse": _cmd_browse,
    "tag-head": _cmd_tag_head,
    "tag-at": _cmd_tag_at,
    "tags": _cmd_tags,
    "tiny-append": _cmd_tiny_append,
    "tiny-read": _cmd_tiny_read,
    "tiny-scan": _cmd_tiny_scan,
    "export-part": _cmd_export_part,
    "evict-part": _cmd_evict_part,
    "import-part": _cmd_import_part,
    "residency": _cmd_residency,
    "checkpoint": _cmd_checkpoint,
    "stats": _cmd_stats,
    "apply": _cmd_apply,
    "dump": _cmd_dump,
    "bench": _cmd_bench,
    "conformance": _cmd_conformance,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condstore",
        description="Hierarchical interval-versioned conditions store.",
    )
    parser.add_argument("--store", default=os.environ.get("CONDDB_STORE"),
                        help="store directory (or CONDDB_STORE)")
    parser.add_argument("--format", choices=("table", "records"), default="table")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("init", help="create an empty store directory")

    p = sub.add_parser("mkset", help="create a folderset")
    p.add_argument("path")
    p.add_argument("--description", default="")

    p = sub.add_parser("mkfolder", help="create a data folder")
    p.add_argument("path")
    p.add_argument("--schema", required=True, help='e.g. "v:float64,ch:int32"')
    p.add_argument("--strategy", choices=("layered", "legacy"), default="layered")
    p.add_argument("--partition", help='e.g. "time:86400" or "version:1000"')
    p.add_argument("--description", default="")

    p = sub.add_parser("mktiny", help="create a tiny scalar folder")
    p.add_argument("path")
    p.add_argument("--kind", choices=("float64", "int64"), default="float64")
    p.add_argument("--partition", help='time-axis only, e.g. "time:86400"')
    p.add_argument("--description", default="")

    p = sub.add_parser("ls", help="list folder children")
    p.add_argument("path", nargs="?", default="/")
    p.add_argument("-R", "--recursive", action="store_true")

    p = sub.add_parser("describe", help="show one folder")
    p.add_argument("path")

    p = sub.add_parser("store", help="store one object")
    p.add_argument("path")
    p.add_argument("--since", required=True)
    p.add_argument("--till", required=True)
    p.add_argument("--values", required=True, help="JSON array or object of payload values")

    p = sub.add_parser("find", help="resolve the object valid at a time")
    p.add_argument("path")
    p.add_argument("--at", required=True)
    p.add_argument("--tag")
    p.add_argument("--seq", type=int, help="explicit sequence ceiling")

    p = sub.add_parser("browse", help="visible objects over a window")
    p.add_argument("path")
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--tag")
    p.add_argument("--seq", type=int)

    p = sub.add_parser("tag-head", help="snapshot folders at their current heads")
    p.add_argument("name")
    p.add_argument("paths", nargs="+")

    p = sub.add_parser("tag-at", help="snapshot folders at explicit sequences")
    p.add_argument("name")
    p.add_argument("entries", nargs="+", help="/path=SEQ ...")

    sub.add_parser("tags", help="list tags")

    p = sub.add_parser("tiny-append", help="append one tiny sample")
    p.add_argument("path")
    p.add_argument("--at", required=True)
    p.add_argument("--value", required=True, help="JSON number")

    p = sub.add_parser("tiny-read", help="read the step function at a time")
    p.add_argument("path")
    p.add_argument("--at", required=True)

    p = sub.add_parser("tiny-scan", help="samples over a window")
    p.add_argument("path")
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)

    p = sub.add_parser("export-part", help="export one partition to a chunk file")
    p.add_argument("path")
    p.add_argument("pidx", type=int)
    p.add_argument("out")

    p = sub.add_parser("evict-part", help="drop a partition from residency")
    p.add_argument("path")
    p.add_argument("pidx", type=int)

    p = sub.add_parser("import-part", help="import a chunk file back")
    p.add_argument("path")
    p.add_argument("chunk")

    p = sub.add_parser("residency", help="partition residency for a folder")
    p.add_argument("path")

    sub.add_parser("checkpoint", help="write index snapshots for fast reopen")
    sub.add_parser("stats", help="engine and backend counters")
    sub.add_parser("apply", help="bulk JSON-lines writes from stdin")
    sub.add_parser("dump", help="canonical full-state JSON lines")

    p = sub.add_parser("bench", help="run a benchmark workload")
    p.add_argument("workload", choices=(
        "matrix", "storeA", "storeB", "readA", "readB", "tiny", "kernels"))
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--strategy", choices=("layered", "legacy"), default="layered")
    p.add_argument("--backend", choices=("file", "memory"), default="file")
    p.add_argument("--kernel", default="auto")
    p.add_argument("--seed", dest="bench_seed", type=int, default=0)

    p = sub.add_parser("conformance", help="differential store comparison")
    p.add_argument("pair", choices=("memory-file", "kernels", "partition"))
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed0", type=int, default=0)
    p.add_argument("--ops", type=int, default=1000)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    needs_store = args.command not in ("bench", "conformance")
    store = None
    try:
        if needs_store:
            if not args.store:
                parser.error("--store (or CONDDB_STORE) is required")
            mode = "ro" if args.command in _READ_COMMANDS else "rw"
            store = open_store(args.store, mode=mode, create=args.command == "init")
        _HANDLERS[args.command](store, args)
        return 0
    except CondStoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if store is not None:
            store.close()


if __name__ == "__main__":
    sys.exit(main())
