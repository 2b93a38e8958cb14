import os
import subprocess
import sys

import pytest

from contracts import DISPATCH, OVERFLOW_ADD, SEL_A, SEL_B
from mcore import cli
from mcore.core.workspace import Workspace
from mcore.evm.detectors import FINDINGS_FILE
from mcore.native.asm import assemble
from mcore.native.minios import parse_byte_spec
from mcore.smt import solver as solver_mod
from mcore.smt.constraints import ConstraintSet
from programs import MAGIC4, branches

TEST_SUFFIXES = {"argv", "stdin", "stdout", "trace", "smt", "messages"}


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def magic(tmp_path):
    path = tmp_path / "magic.bin"
    path.write_bytes(MAGIC4.image)
    return path


def test_parse_args_usage_example():
    ns = cli.parse_args(["target", "++", "+++.txt", "--data", "AA", "--procs", "10"])
    assert ns.mode == "native" and ns.target == "target"
    assert [parse_byte_spec(a) for a in ns.argv] == [[None, None], [None, None, None] + list(b".txt")]
    assert ns.procs == 10
    stdin = cli.stdin_spec(ns.data, ns.stdin_size)
    assert stdin[0] == 0xAA and stdin[1:] == [None] * 256


def test_default_stdin_is_256_symbolic_bytes():
    ns = cli.parse_args(["target"])
    assert cli.stdin_spec(ns.data, ns.stdin_size) == [None] * 256
    assert ns.timeout == 300 and ns.procs == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["target", "--procs", "0"],
        ["target", "--data", "XYZ"],
        ["target", "--frobnicate"],
        [],
        ["native"],
        ["evm"],
        ["evm", "code.hex", "--txlimit", "0"],
        ["replay", "ws"],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == cli.EXIT_USAGE
    assert "error" in err


def test_unreadable_target(tmp_path, capsys):
    code, _, err = run(["native", tmp_path / "nope.bin", "--workspace", tmp_path / "ws"], capsys)
    assert code == cli.EXIT_USAGE and "cannot read" in err


def test_unloadable_image(tmp_path, capsys):
    bad = tmp_path / "odd.bin"
    bad.write_bytes(b"\x01\x02\x03")
    code, _, err = run(["native", bad, "--workspace", tmp_path / "ws"], capsys)
    assert code == cli.EXIT_USAGE


def test_halt_image_gives_one_testcase(tmp_path, capsys):
    target = tmp_path / "halt.bin"
    target.write_bytes(assemble("HALT"))
    ws = tmp_path / "ws"
    code, out, _ = run(["native", target, "--workspace", ws], capsys)
    assert code == cli.EXIT_OK
    assert sorted(os.listdir(ws)) == sorted(f"test_00000000.{s}" for s in TEST_SUFFIXES)
    assert str(ws) in out
    assert (ws / "test_00000000.stdin").read_bytes() == bytes(256)


def test_asm_target_and_argv(tmp_path, capsys):
    src = tmp_path / "prog.asm"
    src.write_text("HALT\n")
    ws = tmp_path / "ws"
    code, _, _ = run([src, "++", "ab+", "--workspace", ws, "--stdin-size", "0"], capsys)
    assert code == cli.EXIT_OK
    assert Workspace(ws).testcase_ids() == [0]


def test_default_workspace_name(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    target = tmp_path / "halt.bin"
    target.write_bytes(assemble("HALT"))
    assert run([target, "--stdin-size", "0"], capsys)[0] == cli.EXIT_OK
    (ws,) = [p for p in os.listdir(tmp_path) if p.startswith("mcore_")]
    suffix = ws[len("mcore_"):]
    assert len(suffix) == 6 and suffix.isalnum() and suffix.lower() == suffix


def test_native_summary_and_replay(tmp_path, magic, capsys):
    ws = tmp_path / "ws"
    code, out, _ = run([magic, "--stdin-size", "4", "--workspace", ws], capsys)
    assert code == cli.EXIT_OK
    assert "states:" in out and "coverage:" in out
    ids = Workspace(ws).testcase_ids()
    assert len(ids) == 2
    for i in ids:
        code, out, _ = run(["replay", ws, i, magic], capsys)
        assert code == cli.EXIT_OK and "MATCH" in out and "MISMATCH" not in out


def test_replay_corrupted_stdin(tmp_path, magic, capsys):
    ws = tmp_path / "ws"
    run([magic, "--stdin-size", "4", "--workspace", ws], capsys)
    w = Workspace(ws)
    bomb = [i for i in w.testcase_ids() if w.read(i, "stdin", binary=True) == MAGIC4.expected_stdin]
    assert bomb
    w.testcase_path(bomb[0], "stdin").write_bytes(b"\0\0\0\0")
    code, out, _ = run(["replay", ws, bomb[0], magic], capsys)
    assert code == cli.EXIT_MISMATCH and "MISMATCH" in out


def test_replay_missing_files(tmp_path, magic, capsys):
    code, _, err = run(["replay", tmp_path, 3, magic], capsys)
    assert code == cli.EXIT_USAGE and "missing" in err


def _hexfile(tmp_path, code: bytes):
    path = tmp_path / "code.hex"
    path.write_text(code.hex() + "\n")
    return path


def test_evm_dispatch(tmp_path, capsys):
    ws = tmp_path / "ws"
    code, out, _ = run(["evm", _hexfile(tmp_path, DISPATCH), "--txdatasize", "36", "--workspace", ws], capsys)
    assert code == cli.EXIT_OK
    w = Workspace(ws)
    ids = w.testcase_ids()
    assert len(ids) >= 2
    assert (ws / "coverage.txt").read_text().splitlines()[-1].endswith(", 100.00")
    assert "coverage: 100.00%" in out
    data = " ".join(w.read(i, "input") for i in ids)
    assert f"data={SEL_A:08x}" in data and f"data={SEL_B:08x}" in data
    assert not w.testcase_path(ids[0], "stdin").exists()


def test_evm_replay_is_rejected(tmp_path, capsys):
    ws = tmp_path / "ws"
    run(["evm", _hexfile(tmp_path, DISPATCH), "--workspace", ws], capsys)
    code, _, err = run(["replay", ws, 0, tmp_path / "code.hex"], capsys)
    assert code == cli.EXIT_USAGE and "native test cases only" in err


def test_evm_detect_overflow_and_shorthand(tmp_path, capsys):
    ws = tmp_path / "ws"
    code = cli.evm_main([str(_hexfile(tmp_path, OVERFLOW_ADD)), "--txdatasize", "64", "--detect-overflow", "--workspace", str(ws)])
    capsys.readouterr()
    assert code == cli.EXIT_OK
    assert len((ws / FINDINGS_FILE).read_text().splitlines()) == 1


def test_evm_txlimit_two(tmp_path, capsys):
    ws = tmp_path / "ws"
    code, _, _ = run(["evm", _hexfile(tmp_path, DISPATCH), "--txlimit", "2", "--txdatasize", "4", "--workspace", ws], capsys)
    assert code == cli.EXIT_OK
    w = Workspace(ws)
    lines = [len(w.read(i, "input").splitlines()) for i in w.testcase_ids()]
    # reverted first transactions stop early; the rest carry two transactions
    assert set(lines) == {1, 2}


def test_evm_malformed_hex(tmp_path, capsys):
    path = tmp_path / "bad.hex"
    path.write_text("60zz")
    code, _, err = run(["evm", path, "--workspace", tmp_path / "ws"], capsys)
    assert code == cli.EXIT_USAGE


def test_timeout_exit_code(tmp_path, capsys):
    target = tmp_path / "b10.bin"
    target.write_bytes(assemble(branches(10)))
    slow = tmp_path / "slow_z3"
    slow.write_text("#!/bin/sh\nsleep 0.3\nexec z3 -in -smt2\n")
    slow.chmod(0o755)
    ws = tmp_path / "ws"
    code, out, _ = run([target, "--stdin-size", "10", "--timeout", "1", "--solver", slow, "--workspace", ws], capsys)
    assert code == cli.EXIT_TIMEOUT
    assert "partial" in out
    assert len(Workspace(ws).testcase_ids()) < 1024


def test_internal_error_exit(tmp_path, magic, capsys):
    code, _, err = run([magic, "--stdin-size", "4", "--solver", "/nonexistent/solver", "--workspace", tmp_path / "ws"], capsys)
    assert code == cli.EXIT_INTERNAL and "internal error" in err


def test_solver_override_does_not_outlive_the_run(tmp_path, magic, capsys):
    before = solver_mod._default_config
    run([magic, "--stdin-size", "4", "--solver", "/nonexistent/solver", "--workspace", tmp_path / "ws"], capsys)
    assert solver_mod._default_config is before
    assert solver_mod.default_solver().is_sat(ConstraintSet())


def test_module_entry_point(tmp_path):
    target = tmp_path / "halt.bin"
    target.write_bytes(assemble("HALT"))
    proc = subprocess.run(
        [sys.executable, "-m", "mcore", str(target), "--stdin-size", "0", "--workspace", str(tmp_path / "ws")],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "workspace:" in proc.stdout
