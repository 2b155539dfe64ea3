"""Stdio bridge between the scripting bindings and the engine.

One JSON request per stdin line, one JSON reply per stdout line, answered
strictly in order. The process holds open stores and update sessions in two
handle tables; everything it touches goes through the engine's public
import surface. Ticks cross the pipe as decimal strings (or the -inf/+inf
literals) because JSON numbers are IEEE doubles and would mangle u64 values;
blob attributes cross as 0x-prefixed hex, matching the CLI record format.
"""

from __future__ import annotations

import json
import sys

from condstore import open_store
from condstore.errors import CondStoreError, InvalidArgument
from condstore.model import (
    MINUS_INF,
    PLUS_INF,
    AttrKind,
    parse_partition_policy,
    parse_schema,
    parse_time,
)


def _tick_in(raw):
    """Ticks arrive as JSON numbers when they fit a double exactly."""
    if type(raw) is int:
        if raw < MINUS_INF or raw > PLUS_INF:
            raise InvalidArgument(f"time {raw} outside the 64-bit validity axis")
        return raw
    if isinstance(raw, str):
        return parse_time(raw)
    raise InvalidArgument(f"bad time literal {raw!r}")


def _value_out(kind, value):
    if kind is AttrKind.BLOB:
        return "0x" + value.hex()
    if kind.is_array:
        return [_value_out(kind.element_kind, v) for v in value]
    return value


def _value_in(kind, raw):
    if kind is AttrKind.BLOB:
        if not isinstance(raw, str) or not raw.startswith("0x"):
            raise InvalidArgument("blobs are 0x-prefixed hex strings")
        try:
            return bytes.fromhex(raw[2:])
        except ValueError:
            raise InvalidArgument("bad hex in blob") from None
    if kind.is_array:
        if not isinstance(raw, list):
            raise InvalidArgument("expected a JSON array")
        return [_value_in(kind.element_kind, v) for v in raw]
    return raw


class Bridge:
    def __init__(self):
        self.stores = {}
        self.sessions = {}
        self.next_handle = 1

    # ------------------------------------------------------------ helpers

    def _handle(self) -> int:
        h = self.next_handle
        self.next_handle += 1
        return h

    def _store(self, args):
        try:
            return self.stores[args["store"]]
        except KeyError:
            raise InvalidArgument(f"unknown store handle {args.get('store')!r}") from None

    def _session(self, args):
        """(owning store, session, in-session schema cache) for a handle."""
        try:
            return self.sessions[args["session"]]
        except KeyError:
            raise InvalidArgument(f"unknown session handle {args.get('session')!r}") from None

    def _pop_session(self, args):
        try:
            return self.sessions.pop(args["session"])
        except KeyError:
            raise InvalidArgument(f"unknown session handle {args.get('session')!r}") from None

    def _schema_for(self, store, path, pending):
        """Folders created in this session are not yet visible to describes."""
        got = pending.get(path)
        if got is not None:
            return got
        return store.describe_folder(path).schema

    def _obj_out(self, store, obj):
        schema = store.describe_folder(str(obj.folder)).schema
        return {
            "folder": str(obj.folder),
            "seq": obj.seq,
            "since": str(obj.stored.since),
            "till": str(obj.stored.till),
            "effective_since": str(obj.effective.since),
            "effective_till": str(obj.effective.till),
            "values": [_value_out(kind, v)
                       for (_, kind), v in zip(schema.attributes, obj.values)],
        }

    # --------------------------------------------------------- operations

    def op_ping(self, args):
        return "pong"

    def op_open(self, args):
        store = open_store(
            args.get("root"),
            backend=args.get("backend", "file"),
            mode=args.get("mode", "rw"),
            create=args.get("create", False),
            kernel=args.get("kernel", "auto"),
            sync=args.get("sync", True),
        )
        handle = self._handle()
        self.stores[handle] = store
        return {"store": handle}

    def op_close(self, args):
        store = self.stores.pop(args["store"], None)
        if store is not None:
            store.close()
        return None

    def op_start_update(self, args):
        store = self._store(args)
        session = store.update()
        handle = self._handle()
        self.sessions[handle] = (store, session, {})
        return {"session": handle}

    def op_commit(self, args):
        self._pop_session(args)[1].commit()
        return None

    def op_abort(self, args):
        self._pop_session(args)[1].abort()
        return None

    def _create_target(self, args):
        """Session-scoped create when a session handle is given."""
        if args.get("session") is not None:
            return self._session(args)[1]
        return self._store(args)

    def op_create_folderset(self, args):
        self._create_target(args).create_folderset(
            args["path"], description=args.get("description", "")
        )
        return None

    def op_create_folder(self, args):
        policy = args.get("partition")
        schema = parse_schema(args["schema"])
        self._create_target(args).create_folder(
            args["path"],
            schema=schema,
            strategy=args.get("strategy", "layered"),
            policy=parse_partition_policy(policy) if policy else None,
            description=args.get("description", ""),
        )
        if args.get("session") is not None:
            self._session(args)[2][args["path"]] = schema
        return None

    def op_create_tiny_folder(self, args):
        policy = args.get("partition")
        self._create_target(args).create_tiny_folder(
            args["path"],
            value_kind=args.get("kind", "float64"),
            policy=parse_partition_policy(policy) if policy else None,
            description=args.get("description", ""),
        )
        return None

    def op_store_object(self, args):
        store, session, pending = self._session(args)
        schema = self._schema_for(store, args["path"], pending)
        values = tuple(
            _value_in(kind, v)
            for (_, kind), v in zip(schema.attributes, args["values"])
        )
        seq = session.store_object(
            args["path"], _tick_in(args["since"]), _tick_in(args["till"]), values
        )
        return {"seq": seq}

    def op_store_many(self, args):
        store, session, pending = self._session(args)
        path = args["path"]
        attrs = self._schema_for(store, path, pending).attributes
        # Rows are compact [since, till, values] triples. Scalar-only schemas
        # skip per-element conversion; the engine still validates every row.
        plain = not any(k is AttrKind.BLOB or k.is_array for _, k in attrs)
        store_one = session.store_object
        tick = _tick_in
        if plain:
            seqs = [
                store_one(path, tick(since), tick(till), tuple(values))
                for since, till, values in args["rows"]
            ]
        else:
            seqs = [
                store_one(path, tick(since), tick(till), tuple(
                    _value_in(kind, v) for (_, kind), v in zip(attrs, values)
                ))
                for since, till, values in args["rows"]
            ]
        return {"seqs": seqs}

    def op_find_object(self, args):
        store = self._store(args)
        obj = store.find_object(
            args["path"], _tick_in(args["at"]),
            tag=args.get("tag"), at_seq=args.get("at_seq"),
        )
        return self._obj_out(store, obj)

    def op_browse_objects(self, args):
        store = self._store(args)
        return [
            self._obj_out(store, obj)
            for obj in store.browse_objects(
                args["path"], _tick_in(args["from"]), _tick_in(args["to"]),
                tag=args.get("tag"), at_seq=args.get("at_seq"),
            )
        ]

    def op_tag_head(self, args):
        tag = self._store(args).tag_head(args["name"], args["paths"])
        return {"name": tag.name, "entries": [[str(p), s] for p, s in tag.entries]}

    def op_tag_at_sequence(self, args):
        tag = self._store(args).tag_at_sequence(
            args["name"], [(p, s) for p, s in args["entries"]]
        )
        return {"name": tag.name, "entries": [[str(p), s] for p, s in tag.entries]}

    def op_list_tags(self, args):
        return [
            {"name": t.name, "entries": [[str(p), s] for p, s in t.entries]}
            for t in self._store(args).list_tags()
        ]

    def op_tiny_append(self, args):
        self._session(args)[1].tiny_append(
            args["path"], _tick_in(args["at"]), args["value"]
        )
        return None

    def op_tiny_append_many(self, args):
        _, session, _ = self._session(args)
        path = args["path"]
        for at, value in args["samples"]:
            session.tiny_append(path, _tick_in(at), value)
        return {"count": len(args["samples"])}

    def op_tiny_read(self, args):
        got = self._store(args).tiny_read(args["path"], _tick_in(args["at"]))
        return {
            "at": str(got.at),
            "value": got.value,
            "effective_since": str(got.effective.since),
            "effective_till": str(got.effective.till),
        }

    def op_tiny_scan(self, args):
        return [
            [str(ts), value]
            for ts, value in self._store(args).tiny_scan(
                args["path"], _tick_in(args["from"]), _tick_in(args["to"])
            )
        ]

    def op_describe_folder(self, args):
        info = self._store(args).describe_folder(args["path"])
        return {
            "path": str(info.path),
            "kind": info.kind.value,
            "description": info.description,
            "schema": info.schema.render() if info.schema else None,
            "strategy": info.strategy.value if info.strategy else None,
            "policy": info.policy.render() if info.policy else None,
            "count": info.count,
            "max_seq": info.max_seq,
        }

    def op_list_children(self, args):
        return [
            {"path": str(node.path), "kind": node.kind.value}
            for node in self._store(args).list_children(args.get("path", "/"))
        ]

    def op_stats(self, args):
        return self._store(args).stats_snapshot()

    # -------------------------------------------------------------- loop

    def run(self):
        out = sys.stdout
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            req = json.loads(line)
            reply = {"id": req.get("id")}
            try:
                handler = getattr(self, "op_" + req["op"], None)
                if handler is None:
                    raise InvalidArgument(f"unknown op {req['op']!r}")
                reply["ok"] = True
                reply["result"] = handler(req)
            except CondStoreError as exc:
                reply["ok"] = False
                reply["error"] = type(exc).__name__
                reply["message"] = str(exc)
            except Exception as exc:  # keep the process alive on protocol bugs
                reply["ok"] = False
                reply["error"] = type(exc).__name__
                reply["message"] = str(exc)
            out.write(json.dumps(reply, ensure_ascii=False))
            out.write("\n")
            out.flush()
        for _, session, _ in self.sessions.values():
            session.abort()
        for store in self.stores.values():
            store.close()


if __name__ == "__main__":
    Bridge().run()
