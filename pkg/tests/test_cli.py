"""Command-line front end, driven in-process through main()."""

from __future__ import annotations

import io
import json

import pytest

from condstore.cli import main


@pytest.fixture()
def root(tmp_path):
    path = str(tmp_path / "db")
    assert main(["--store", path, "init"]) == 0
    return path


def run(capsys, argv, stdin=None, monkeypatch=None):
    """Invoke main() and return (exit_code, stdout_lines, stderr)."""
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    capsys.readouterr()
    code = main(argv)
    captured = capsys.readouterr()
    lines = [l for l in captured.out.splitlines() if l]
    return code, lines, captured.err


def records(capsys, argv, monkeypatch=None, stdin=None):
    code, lines, err = run(capsys, argv, stdin=stdin, monkeypatch=monkeypatch)
    assert code == 0, err
    return [json.loads(l) for l in lines]


# ---------------------------------------------------------------- plumbing

def test_no_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_missing_store_flag_is_a_usage_error(capsys, monkeypatch):
    monkeypatch.delenv("CONDDB_STORE", raising=False)
    with pytest.raises(SystemExit) as err:
        main(["ls", "/"])
    assert err.value.code == 2


def test_store_flag_via_environment(capsys, monkeypatch, tmp_path):
    path = str(tmp_path / "envdb")
    monkeypatch.setenv("CONDDB_STORE", path)
    code, lines, _ = run(capsys, ["init"])
    assert code == 0
    code, lines, _ = run(capsys, ["ls"])
    assert code == 0


def test_domain_errors_exit_1(capsys, root):
    code, _, err = run(capsys, ["--store", root, "find", "/nope", "--at", "5"])
    assert code == 1
    assert err.startswith("error:")


def test_bad_time_literal_exits_1(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    code, _, err = run(capsys, ["--store", root, "find", "/f", "--at", "soon"])
    assert code == 1
    assert "error:" in err


# ---------------------------------------------------------------- roundtrip

def test_create_store_find_roundtrip(capsys, root):
    assert main(["--store", root, "mkset", "/detector"]) == 0
    assert main([
        "--store", root, "mkfolder", "/detector/hv",
        "--schema", "v:float64,ch:int32", "--description", "supply voltages",
    ]) == 0
    code, lines, _ = run(capsys, [
        "--store", root, "--format", "records", "store", "/detector/hv",
        "--since", "0", "--till", "100", "--values", "[1.5, 7]",
    ])
    assert code == 0
    assert json.loads(lines[0]) == {"seq": 1}

    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/detector/hv", "--at", "50",
    ])[0]
    assert got["folder"] == "/detector/hv"
    assert got["seq"] == 1
    assert got["since"] == "0" and got["till"] == "100"
    assert got["values"] == [1.5, 7]


def test_ticks_render_as_strings(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    main(["--store", root, "store", "/f",
          "--since", "0", "--till", "+inf", "--values", "[1]"])
    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/f", "--at", "12",
    ])[0]
    assert got["till"] == str(2**64 - 1)
    assert isinstance(got["since"], str)


def test_blob_values_roundtrip_as_hex(capsys, root):
    main(["--store", root, "mkfolder", "/b", "--schema", "raw:blob"])
    assert main(["--store", root, "store", "/b",
                 "--since", "0", "--till", "10", "--values", '["0xdeadbeef"]']) == 0
    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/b", "--at", "3",
    ])[0]
    assert got["values"] == ["0xdeadbeef"]


def test_values_as_mapping(capsys, root):
    main(["--store", root, "mkfolder", "/m", "--schema", "a:int32,b:int32"])
    assert main(["--store", root, "store", "/m", "--since", "0", "--till", "5",
                 "--values", '{"b": 2, "a": 1}']) == 0
    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/m", "--at", "0",
    ])[0]
    assert got["values"] == [1, 2]


def test_browse_with_open_window_literals(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    main(["--store", root, "store", "/f", "--since", "0", "--till", "100",
          "--values", "[1]"])
    main(["--store", root, "store", "/f", "--since", "50", "--till", "60",
          "--values", "[2]"])
    got = records(capsys, [
        "--store", root, "--format", "records", "browse", "/f",
        "--from=-inf", "--to", "+inf",
    ])
    assert [g["values"] for g in got] == [[1], [2], [1]]
    assert got[0]["effective_till"] == "50"
    assert got[2]["effective_since"] == "60"


def test_ls_and_describe(capsys, root):
    main(["--store", root, "mkset", "/a"])
    main(["--store", root, "mkfolder", "/a/f", "--schema", "v:int32"])
    got = records(capsys, ["--store", root, "--format", "records", "ls", "/"])
    assert [g["path"] for g in got] == ["/a"]
    got = records(capsys, ["--store", root, "--format", "records", "ls", "-R"])
    assert [g["path"] for g in got] == ["/", "/a", "/a/f"]
    info = records(capsys, [
        "--store", root, "--format", "records", "describe", "/a/f",
    ])[0]
    assert info["schema"] == "v:int32"
    assert info["strategy"] == "layered"
    assert info["count"] == 0


# ---------------------------------------------------------------- tags

def test_tag_flow(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    main(["--store", root, "store", "/f", "--since", "0", "--till", "10",
          "--values", "[1]"])
    assert main(["--store", root, "tag-head", "release-1", "/f"]) == 0
    main(["--store", root, "store", "/f", "--since", "0", "--till", "10",
          "--values", "[2]"])

    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/f",
        "--at", "5", "--tag", "release-1",
    ])[0]
    assert got["values"] == [1]

    tags = records(capsys, ["--store", root, "--format", "records", "tags"])
    assert tags[0]["name"] == "release-1"
    assert tags[0]["entries"] == [["/f", 1]]


def test_tag_at_explicit_sequences(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    for v in (1, 2, 3):
        main(["--store", root, "store", "/f", "--since", "0", "--till", "10",
              "--values", f"[{v}]"])
    assert main(["--store", root, "tag-at", "pinned", "/f=2"]) == 0
    got = records(capsys, [
        "--store", root, "--format", "records", "find", "/f",
        "--at", "5", "--tag", "pinned",
    ])[0]
    assert got["values"] == [2]


# ---------------------------------------------------------------- tiny

def test_tiny_flow(capsys, root):
    assert main(["--store", root, "mktiny", "/temp", "--kind", "float64"]) == 0
    for ts, v in ((10, 1.5), (20, 2.5), (30, 3.5)):
        assert main(["--store", root, "tiny-append", "/temp",
                     "--at", str(ts), "--value", str(v)]) == 0
    got = records(capsys, [
        "--store", root, "--format", "records", "tiny-read", "/temp", "--at", "25",
    ])[0]
    assert got == {
        "at": "20", "value": 2.5,
        "effective_since": "20", "effective_till": "30",
    }
    scan = records(capsys, [
        "--store", root, "--format", "records", "tiny-scan", "/temp",
        "--from", "15", "--to", "+inf",
    ])
    assert [(s["at"], s["value"]) for s in scan] == [
        ("10", 1.5), ("20", 2.5), ("30", 3.5)]


# ---------------------------------------------------------------- partitions

def test_partition_lifecycle(capsys, root, tmp_path):
    main(["--store", root, "mkfolder", "/p", "--schema", "v:int32",
          "--partition", "time:100"])
    for i in range(6):
        main(["--store", root, "store", "/p", "--since", str(i * 40),
              "--till", str(i * 40 + 40), "--values", f"[{i}]"])

    rows = records(capsys, ["--store", root, "--format", "records", "residency", "/p"])
    assert [(r["pidx"], r["resident"]) for r in rows] == [
        (0, True), (1, True), (2, True)]

    chunk = str(tmp_path / "p0.chunk")
    got = records(capsys, [
        "--store", root, "--format", "records", "export-part", "/p", "0", chunk,
    ])[0]
    assert got == {"exported": 3}
    assert main(["--store", root, "evict-part", "/p", "0"]) == 0

    code, _, err = run(capsys, ["--store", root, "find", "/p", "--at", "50"])
    assert code == 1 and "error:" in err

    got = records(capsys, [
        "--store", root, "--format", "records", "import-part", "/p", chunk,
    ])[0]
    assert got == {"imported": 3}
    back = records(capsys, [
        "--store", root, "--format", "records", "find", "/p", "--at", "50",
    ])[0]
    assert back["values"] == [1]


# ---------------------------------------------------------------- misc

def test_stats_are_json(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    stats = records(capsys, ["--store", root, "--format", "records", "stats"])[0]
    assert "commits" in stats
    assert "backend_commits" in stats


def test_checkpoint_command(capsys, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    code, lines, _ = run(capsys, ["--store", root, "checkpoint"])
    assert code == 0
    assert lines == ["checkpoint written"]


# ---------------------------------------------------------------- apply/dump

APPLY_SCRIPT = "\n".join([
    json.dumps({"op": "mkset", "path": "/det"}),
    json.dumps({"op": "mkfolder", "path": "/det/hv", "schema": "v:float64"}),
    json.dumps({"op": "mktiny", "path": "/det/t", "kind": "int64"}),
    json.dumps({"op": "store", "path": "/det/hv",
                "since": 0, "till": 100, "values": [1.0]}),
    json.dumps({"op": "commit"}),
    json.dumps({"op": "tag-head", "name": "r1", "paths": ["/det/hv"]}),
    json.dumps({"op": "store", "path": "/det/hv",
                "since": 50, "till": 60, "values": [2.0]}),
    json.dumps({"op": "tiny", "path": "/det/t", "at": 5, "value": 7}),
    json.dumps({"op": "tiny", "path": "/det/t", "at": 9, "value": 8}),
]) + "\n"


def test_apply_then_dump(capsys, monkeypatch, root):
    code, lines, _ = run(capsys, ["--store", root, "apply"],
                         stdin=APPLY_SCRIPT, monkeypatch=monkeypatch)
    assert code == 0
    assert lines[-1] == "applied 9 op(s)"

    dump = records(capsys, ["--store", root, "dump"])
    kinds = [d["type"] for d in dump]
    assert kinds.count("node") == 3
    assert kinds.count("visible") == 3  # patched layer splits the base object
    assert kinds.count("sample") == 2
    assert kinds.count("tag") == 1
    tag = next(d for d in dump if d["type"] == "tag")
    assert tag == {"type": "tag", "name": "r1", "entries": [["/det/hv", 1]]}


def test_apply_is_deterministic_across_stores(capsys, monkeypatch, tmp_path):
    dumps = []
    for name in ("one", "two"):
        path = str(tmp_path / name)
        assert main(["--store", path, "init"]) == 0
        code, _, _ = run(capsys, ["--store", path, "apply"],
                         stdin=APPLY_SCRIPT, monkeypatch=monkeypatch)
        assert code == 0
        code, lines, _ = run(capsys, ["--store", path, "dump"])
        assert code == 0
        dumps.append(lines)
    assert dumps[0] == dumps[1]


def test_apply_bad_op_aborts_cleanly(capsys, monkeypatch, root):
    main(["--store", root, "mkfolder", "/f", "--schema", "v:int32"])
    script = "\n".join([
        json.dumps({"op": "store", "path": "/f",
                    "since": 0, "till": 10, "values": [1]}),
        json.dumps({"op": "frobnicate"}),
    ]) + "\n"
    code, _, err = run(capsys, ["--store", root, "apply"],
                       stdin=script, monkeypatch=monkeypatch)
    assert code == 1
    assert "error:" in err
    # the uncommitted store op must not have landed
    code, _, _ = run(capsys, ["--store", root, "find", "/f", "--at", "5"])
    assert code == 1
