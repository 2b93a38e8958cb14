"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line; the lines are also
repeated in the pytest terminal summary.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import os
import random
import time

import numpy as np
import pytest
from Crypto.Hash import keccak as ref_keccak

from contracts import DISPATCH, OVERFLOW_ADD, ROLLBACK, SEL_A, SEL_B
from exprgen import X, Y, brute, instance
from helpers import explore, trace_addresses
from mcore import cli, kernels
from mcore.core.workspace import Workspace
from mcore.evm import keccak as py_keccak
from mcore.evm.detectors import IntegerOverflowDetector, read_findings
from mcore.evm.explorer import EVMExplorer
from mcore.native.asm import assemble, symbols
from mcore.native.replay import concrete_replay, replay_testcase
from mcore.smt import expression as E
from mcore.smt.constraints import ConstraintSet
from mcore.smt.simplify import simplify
from mcore.smt.solver import default_solver
from programs import BOMBS, HOOKED, branches

RESULTS = []


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title} -- {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


# -- 1 ------------------------------------------------------------------------------------

def test_criterion_01_path_count():
    start = time.time()
    report = explore(branches(10), "+" * 10, timeout=120)
    elapsed = time.time() - start
    ok = report.terminated == 1024 and report.forks == 1023 and elapsed < 120 and not report.timed_out
    verdict(1, "2^10 path-count oracle", ok, f"{report.terminated} terminated, {report.forks} forks, {elapsed:.1f}s (limit 120s)")


# -- 2 and 3 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bomb_runs(tmp_path_factory):
    runs = []
    for bomb in BOMBS:
        ws = Workspace(tmp_path_factory.mktemp(bomb.name) / "ws")
        start = time.time()
        report = explore(bomb.image, bomb.stdin, bomb.argv, ws, bomb.memory_model, timeout=300)
        runs.append((bomb, ws, report, time.time() - start))
    return runs


def test_criterion_02_logic_bombs(bomb_runs):
    defused, satisfiable, false_hits, slow = 0, 0, 0, []
    for bomb, ws, report, elapsed in bomb_runs:
        if report.timed_out or elapsed >= 300:
            slow.append(bomb.name)
        hits = []
        for i in ws.testcase_ids():
            if bomb.bomb_address not in trace_addresses(ws, i):
                continue
            # the stored input must reach the bomb in an independent concrete run
            argv = [bytes.fromhex(line) for line in ws.read(i, "argv").split()]
            reason, trace, _ = concrete_replay(bomb.image, ws.read(i, "stdin", binary=True), argv)
            if bomb.bomb_address in trace and str(reason) == "Exit(42)":
                hits.append(i)
        if bomb.satisfiable:
            satisfiable += 1
            defused += bool(hits)
        else:
            false_hits += len(hits)
    unsat = sum(not b.satisfiable for b in BOMBS)
    ok = len(BOMBS) >= 10 and unsat >= 1 and defused == satisfiable and false_hits == 0 and not slow
    verdict(
        2,
        "mini logic-bomb suite",
        ok,
        f"{defused}/{satisfiable} satisfiable bombs defused, {false_hits} test cases reach the {unsat} unsatisfiable ones, "
        f"slowest {max(r[3] for r in bomb_runs):.1f}s (limit 300s)",
    )


def test_criterion_03_replay_soundness(bomb_runs):
    total, mismatches = 0, []
    for bomb, ws, _, _ in bomb_runs:
        for i in ws.testcase_ids():
            total += 1
            result = replay_testcase(ws, i, bomb.image)
            if not result.match:
                mismatches.append(f"{bomb.name}#{i}")
    verdict(3, "replay soundness", total > 0 and not mismatches, f"{total - len(mismatches)}/{total} MATCH, mismatches: {mismatches or 0}")


# -- 4 ------------------------------------------------------------------------------------

ALL_VALUES_CAP = 64


def test_criterion_04_solver_properties():
    solver = default_solver()
    n = 1000
    simp_ok = check_ok = enum_ok = 0
    truncated = 0
    for seed in range(n):
        value, cond = instance(seed)
        truth = brute(cond)
        values = brute(value)
        simp_ok += np.array_equal(brute(simplify(value)), values) and np.array_equal(brute(simplify(cond)), truth)

        cs = ConstraintSet().declare(X, Y).add(cond)
        sat = solver.is_sat(cs)
        good = sat == bool(truth.any())
        if good and sat:
            vx, vy = solver.get_values(cs, [X, Y])
            good = bool(truth[vx * 256 + vy])
        check_ok += good

        expected = {int(v) for v in np.unique(values[truth])}
        got = solver.all_values(cs, value, ALL_VALUES_CAP)
        if len(expected) <= ALL_VALUES_CAP:
            enum_ok += len(got) == len(set(got)) and set(got) == expected
        else:
            # capped: exactly cap distinct values, all of them feasible
            truncated += 1
            enum_ok += len(set(got)) == ALL_VALUES_CAP and set(got) <= expected
    ok = simp_ok == check_ok == enum_ok == n
    verdict(
        4,
        "solver-layer property suite",
        ok,
        f"simplify {simp_ok}/{n}, check {check_ok}/{n}, all_values {enum_ok}/{n} "
        f"({truncated} instances above the cap of {ALL_VALUES_CAP} checked as feasible subsets)",
    )


# -- 5 ------------------------------------------------------------------------------------

def test_criterion_05_keccak():
    def reference(data):
        return ref_keccak.new(digest_bits=256, data=data).digest()

    listed = {
        b"": "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470",
        b"abc": "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45",
    }
    rng = random.Random(5)
    inputs = list(listed) + [bytes(rng.randrange(256) for _ in range(rng.randrange(0, 600))) for _ in range(100)]
    agree = 0
    for data in inputs:
        ref = reference(data)
        ours = {kernels.keccak256(data), py_keccak.keccak256(data)}
        agree += ours == {ref} and (data not in listed or ref.hex() == listed[data])
    verdict(5, "Keccak-256 vectors", agree == len(inputs), f"{agree}/{len(inputs)} digests agree (kernel backend: {kernels.BACKEND})")


# -- 6 ------------------------------------------------------------------------------------

def _walk(code):
    out, pc = set(), 0
    while pc < len(code):
        out.add(pc)
        pc += 1 + (code[pc] - 0x5F if 0x60 <= code[pc] <= 0x7F else 0)
    return out


def _run_cli(argv):
    code = cli.main([str(a) for a in argv])
    assert code == cli.EXIT_OK, code
    return Workspace(argv[argv.index("--workspace") + 1])


def _traces(ws):
    return {ws.read(i, "trace") for i in ws.testcase_ids()}


def test_criterion_06_dispatch_coverage(tmp_path):
    hexfile = tmp_path / "dispatch.hex"
    hexfile.write_text(DISPATCH.hex())
    ws = _run_cli(["evm", hexfile, "--txlimit", "1", "--txdatasize", "36", "--workspace", tmp_path / "ws"])
    line = (ws.path / "coverage.txt").read_text().splitlines()[0]
    _, done, total, percent = [p.strip() for p in line.split(",")]
    executed = {int(l.split(":")[1], 16) for i in ws.testcase_ids() for l in ws.read(i, "trace").split()}
    selectors = {ws.read(i, "input").split("data=")[1][:8] for i in ws.testcase_ids()}
    want = {f"{SEL_A:08x}", f"{SEL_B:08x}"}
    ok = percent == "100.00" and executed == _walk(DISPATCH) and int(total) == len(_walk(DISPATCH)) and want <= selectors
    verdict(6, "EVM dispatch coverage", ok, f"coverage {percent}% ({done}/{total}), selectors found {sorted(want & selectors)}")


# -- 7 ------------------------------------------------------------------------------------

def test_criterion_07_rollback():
    x = EVMExplorer()
    target = x.create_contract(ROLLBACK, balance=3)
    before = x.world.clone()
    report = x.apply_symbolic_transaction(target, 32)
    reverted = [s for s in report.terminated_states if str(s.termination) == "Revert"]
    stopped = x.alive
    key = E.bv(7, 256)
    exact = len(reverted) == 1 and reverted[0].context.world.accounts_equal(before)
    committed = len(stopped) == 1 and stopped[0].must_be_true(E.select(stopped[0].context.world.get(target).storage, key).eq(5))
    verdict(7, "rollback exactness", exact and committed, f"revert restores snapshot: {exact}; sibling STOP keeps storage[7]=5: {committed}")


# -- 8 ------------------------------------------------------------------------------------

def test_criterion_08_worker_independence(tmp_path):
    native = tmp_path / "b10.bin"
    native.write_bytes(assemble(branches(10)))
    hexfile = tmp_path / "dispatch.hex"
    hexfile.write_text(DISPATCH.hex())
    same = {}
    for name, argv in (
        ("2^10 branches", [native, "--stdin-size", "10"]),
        ("dispatch", ["evm", hexfile, "--txdatasize", "36"]),
    ):
        sets = [_traces(_run_cli(argv + ["--procs", p, "--workspace", tmp_path / f"{name}-{p}"])) for p in ("1", "4")]
        same[name] = (sets[0] == sets[1], len(sets[0]))
    ok = all(s for s, _ in same.values()) and same["2^10 branches"][1] == 1024
    detail = "; ".join(f"{k}: {n} traces, identical={s}" for k, (s, n) in same.items())
    verdict(8, "worker independence (--procs 1 vs 4)", ok, detail)


# -- 9 ------------------------------------------------------------------------------------

def test_criterion_09_hook_semantics():
    image = assemble(HOOKED)
    done = symbols(HOOKED)["done"]

    # independent enumeration: the path depends on byte 0 and on whether byte 1 is zero
    all_paths, feasible = set(), set()
    for b0 in range(256):
        for b1 in (0, 1):
            _, trace, _ = concrete_replay(image, bytes([b0, b1]), [])
            all_paths.add(tuple(trace))
            if b0 == 0x44:
                feasible.add(tuple(trace))

    def drop_if_0x44(state):
        if state.can_be_true(state.cpu.R3.eq(0x44)):
            state.abandon()

    baseline = explore(HOOKED, "++")
    hooked = explore(HOOKED, "++", hooks=[(done, drop_if_0x44)])
    ok = (
        baseline.traces() == all_paths
        and hooked.traces() == all_paths - feasible
        and hooked.abandoned == len(feasible)
        and hooked.terminated == baseline.terminated - len(feasible)
    )
    verdict(
        9,
        "hook abandons exactly the feasible states",
        ok,
        f"{baseline.terminated} -> {hooked.terminated} terminated, {hooked.abandoned} abandoned, "
        f"{len(feasible)} paths admit R3 = 0x44 by enumeration",
    )


# -- 10 -----------------------------------------------------------------------------------

def test_criterion_10_overflow_detector(tmp_path):
    ws = Workspace(tmp_path / "ws")
    x = EVMExplorer(workspace=ws)
    IntegerOverflowDetector(ws).attach(x)
    target = x.create_contract(OVERFLOW_ADD)
    x.apply_symbolic_transaction(target, 64)
    findings = read_findings(ws)
    wraps = False
    if len(findings) == 1:
        w = findings[0]["witness"]
        raw = bytes(int(w[f"txdata_0_{i}"], 16) for i in range(64))
        a, b = int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big")
        wraps = a + b >= 1 << 256 and (a + b) % (1 << 256) < a
    verdict(10, "overflow detector", len(findings) == 1 and wraps, f"{len(findings)} finding(s); witness sum wraps: {wraps}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([os.path.abspath(__file__), "-v"]))
