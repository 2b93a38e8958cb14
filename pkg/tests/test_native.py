import random

import pytest

from helpers import explore, trace_addresses
from mcore.core.engine import Engine, EngineConfig
from mcore.core.events import Concretize
from mcore.native import isa
from mcore.native.asm import AsmError, assemble, disassemble, symbols
from mcore.native.concrete import run_concrete as py_run_concrete
from mcore.native.cpu import LoadError, MiniVM, load_program
from mcore.native.memory import CONCRETIZING, FULLY_SYMBOLIC
from mcore.native.minios import parse_byte_spec
from mcore.native.replay import concrete_replay, replay_testcase
from mcore.smt import expression as E
from programs import read_stdin

try:
    from mcore import _speedups
except ImportError:
    _speedups = None


class TestDecode:
    def test_loadi(self):
        insn = isa.decode(bytes.fromhex("010000002a000000"))
        assert insn.mnemonic == "LOADI" and insn.rd == 0 and insn.imm == 42

    def test_halt(self):
        assert isa.decode(bytes(8)).mnemonic == "HALT"

    def test_unknown_opcode(self):
        with pytest.raises(isa.DecodeError):
            isa.decode(bytes([0xFF]) + bytes(7))

    def test_bad_register(self):
        with pytest.raises(isa.DecodeError):
            isa.decode(bytes([isa.MOV, 8, 0, 0]) + bytes(4))

    def test_roundtrip_all_opcodes(self):
        rng = random.Random(3)
        for op in isa.MNEMONICS:
            insn = isa.Instruction(op, rng.randrange(8), rng.randrange(8), rng.randrange(8), rng.getrandbits(32))
            assert isa.decode(isa.encode(insn)) == insn


class TestAssembler:
    def test_labels_and_data(self):
        src = "start: LOADI R1, table\n JMP start\ntable: .bytes 01 02 03\n .word 0xdeadbeef"
        img = assemble(src)
        assert len(img) == 32
        assert symbols(src) == {"start": 0x1000, "table": 0x1010}
        assert isa.decode(img[:8]).imm == 0x1010
        assert img[16:19] == b"\x01\x02\x03" and img[24:28] == bytes.fromhex("efbeadde")

    def test_char_literal_and_offsets(self):
        img = assemble("a: LOADI R2, 'A'\n LOAD R3, [R2-4]\n JMP a+8")
        assert isa.decode(img[:8]).imm == 0x41
        assert isa.decode(img[8:16]).imm == (-4) & 0xFFFFFFFF
        assert isa.decode(img[16:24]).imm == 0x1008

    def test_errors(self):
        with pytest.raises(AsmError):
            assemble("FROB R1")
        with pytest.raises(AsmError):
            assemble("ADD R1, R2")
        with pytest.raises(AsmError):
            assemble("x: HALT\nx: HALT")

    def test_disassemble(self):
        lines = disassemble(assemble("LOADI R0, 42\nHALT"))
        assert lines[0][0] == 0x1000 and "LOADI" in lines[0][1]


class TestLoad:
    def test_halt_runs(self):
        rep = explore("HALT")
        assert rep.terminated == 1 and rep.forks == 0 and rep.reasons == {"Exit(0)": 1}

    def test_byte_spec(self):
        assert parse_byte_spec("++.txt") == [None, None] + list(b".txt")

    def test_stdin_spec_symbols(self):
        st = load_program(assemble("HALT"), "++.txt")
        stdin = st.context.os.stdin
        assert [b.name for b in stdin[:2]] == ["stdin_0", "stdin_1"]
        assert stdin[2:] == list(b".txt")

    def test_prefix_then_symbolic(self):
        st = load_program(assemble("HALT"), list(b"AA") + [None] * 256)
        stdin = st.context.os.stdin
        assert stdin[:2] == [0x41, 0x41]
        assert stdin[2].name == "stdin_2" and stdin[-1].name == "stdin_257"
        assert len(st.input_registry) == 256

    def test_initial_registers_and_memory(self):
        st = load_program(assemble("HALT"))
        ctx = st.context
        assert ctx.pc == 0x1000 and all(r == E.bv(0, 32) for r in ctx.regs)
        assert ctx.memory.read_bytes(0x20000, 4) == [E.bv(0, 8)] * 4

    def test_oversized_image(self):
        with pytest.raises(LoadError):
            load_program(bytes(isa.CODE_LIMIT))

    def test_misaligned_image(self):
        with pytest.raises(LoadError):
            load_program(b"\x00" * 7)


class TestExecute:
    def test_constant_fold(self):
        st = load_program(assemble("LOADI R0, 1\nLOADI R1, 2\nADD R2, R0, R1\nHALT"))
        vm = MiniVM()
        for _ in range(3):
            vm.execute(st)
        assert st.context.R2 == E.bv(3, 32)

    def test_branch_raises_concretize(self):
        st = load_program(assemble(read_stdin(1) + "LOADI R2, 0x20000\nLOAD R0, [R2+0]\nJZ R0, 0x1100\nHALT"), "+")
        vm = MiniVM()
        with pytest.raises(Concretize):
            for _ in range(10):
                vm.execute(st)

    def test_branch_children(self):
        src = read_stdin(1) + """
    LOADI R2, 0x20000
    LOAD R0, [R2+0]
    LOADI R5, 0xFF
    AND R0, R0, R5
    JZ R0, target
    HALT
target:
    HALT
"""
        pcs = []
        rep = explore(src, "+", subscribers=[("state_forked", lambda p, c: pcs.append(c.id))])
        assert rep.terminated == 2 and rep.forks == 1 and len(pcs) == 2
        tgt = symbols(src)["target"]
        assert sum(1 for t in rep.traces() if tgt in t) == 1

    def test_jump_to_unmapped(self):
        rep = explore("JMP 0x0")
        assert rep.reasons == {"MemoryViolation(0x0)": 1}

    def test_invalid_opcode(self):
        rep = explore(bytes([0xFF]) + bytes(7))
        assert list(rep.reasons) == ["InvalidInstruction"]

    def test_shift_amount_masked(self):
        st = load_program(assemble("LOADI R0, 1\nLOADI R1, 33\nSHL R2, R0, R1\nHALT"))
        vm = MiniVM()
        for _ in range(3):
            vm.execute(st)
        assert st.context.R2 == E.bv(2, 32)

    def test_ltu(self):
        st = load_program(assemble("LOADI R0, 1\nLOADI R1, 0xFFFFFFFF\nLTU R2, R0, R1\nLTU R3, R1, R0\nHALT"))
        vm = MiniVM()
        for _ in range(4):
            vm.execute(st)
        assert (st.context.R2, st.context.R3) == (E.bv(1, 32), E.bv(0, 32))


class TestMemory:
    def test_store_load_roundtrip(self):
        rep = explore("""
    LOADI R1, 0x20000
    LOADI R2, 0x11223344
    STORE [R1+0], R2
    LOAD R3, [R1+0]
    SUB R4, R3, R2
    JNZ R4, bad
    HALT
bad:
    JMP 0
""")
        assert rep.reasons == {"Exit(0)": 1}

    def test_little_endian_bytes(self):
        st = load_program(assemble("LOADI R1, 0x20000\nLOADI R2, 0x11223344\nSTORE [R1+0], R2\nHALT"))
        vm = MiniVM()
        for _ in range(3):
            vm.execute(st)
        assert [b.value for b in st.context.memory.read_bytes(0x20000, 4)] == [0x44, 0x33, 0x22, 0x11]

    def test_unmapped_read(self):
        rep = explore("LOADI R1, 0\nLOAD R2, [R1+0]\nHALT")
        assert rep.reasons == {"MemoryViolation(0x0)": 1}

    def test_write_to_code(self):
        rep = explore("LOADI R1, 0x1000\nSTORE [R1+0], R1\nHALT")
        assert rep.reasons == {"MemoryViolation(0x1000)": 1}

    def test_read_straddling_region_end(self):
        src = "LOADI R1, 0x2FFFE\nLOAD R2, [R1+0]\nHALT"
        rep = explore(src)
        # the reported address is the start of the faulting access
        assert list(rep.reasons) == ["MemoryViolation(0x2fffe)"]
        assert str(concrete_replay(assemble(src), b"")[0]) == "MemoryViolation(0x2fffe)"

    def _two_addresses(self, model):
        # address = 0x20000 + 4 * (stdin_0 & 1): two feasible values
        src = read_stdin(1) + """
    LOADI R2, 0x20000
    LOAD R4, [R2+0]
    LOADI R5, 1
    AND R4, R4, R5
    LOADI R5, 2
    SHL R4, R4, R5
    ADD R4, R4, R2
    LOAD R6, [R4+0]
    HALT
"""
        reads = []
        rep = explore(src, "+", memory_model=model, subscribers=[("memory_read", lambda s, a, n, v: reads.append(a))])
        return rep, reads

    def test_concretizing_forks_per_address(self):
        rep, _ = self._two_addresses(CONCRETIZING)
        assert rep.terminated == 2 and rep.forks == 1

    def test_fully_symbolic_single_path(self):
        rep, reads = self._two_addresses(FULLY_SYMBOLIC)
        assert rep.terminated == 1 and rep.forks == 0
        assert any(not isinstance(a, E.Constant) for a in reads)

    def test_fully_symbolic_store_then_load(self):
        # STORE through a symbolic pointer, read back through a concrete one
        src = read_stdin(1) + """
    LOADI R2, 0x20000
    LOAD R4, [R2+0]
    LOADI R5, 4
    AND R4, R4, R5
    ADD R4, R4, R2
    LOADI R6, 0x99
    STORE [R4+8], R6
    LOAD R7, [R2+12]
    LOADI R5, 0xFF
    AND R7, R7, R5
    JZ R7, zero
    LOADI R1, 1
zero:
    HALT
"""
        rep = explore(src, "+", memory_model=FULLY_SYMBOLIC)
        assert rep.terminated == 2

    def test_fully_symbolic_unmapped_abandons(self):
        src = read_stdin(1) + "LOADI R2, 0x20000\nLOAD R4, [R2+0]\nLOADI R5, 0x40000\nADD R4, R4, R5\nLOAD R6, [R4+0]\nHALT"
        rep = explore(src, "+", memory_model=FULLY_SYMBOLIC)
        assert rep.terminated == 0 and rep.abandoned == 1

    def test_memory_write_event(self):
        writes = []
        explore("LOADI R1, 0x20000\nSTORE [R1+4], R1\nHALT", subscribers=[("memory_write", lambda s, a, n, v: writes.append((a, n, v)))])
        assert writes == [(E.bv(0x20004, 32), 4, E.bv(0x20000, 32))]


class TestSyscalls:
    def test_read_copies_specs(self):
        st = load_program(assemble(read_stdin(4) + "HALT"), "+A+B")
        vm = MiniVM()
        for _ in range(5):
            vm.execute(st)
        mem = st.context.memory.read_bytes(0x20000, 4)
        assert mem[0].name == "stdin_0" and mem[1] == E.bv(0x41, 8)
        assert mem[2].name == "stdin_2" and mem[3] == E.bv(0x42, 8)
        assert st.context.R0 == E.bv(4, 32)

    def test_exit_code(self):
        rep = explore("LOADI R0, 0\nLOADI R1, 7\nSYSCALL")
        assert rep.reasons == {"Exit(7)": 1}

    def test_read_at_eof(self):
        src = read_stdin(2) + read_stdin(2) + "MOV R1, R0\nLOADI R0, 0\nSYSCALL"
        rep = explore(src, "AB")
        assert rep.reasons == {"Exit(0)": 1}

    def test_short_read_returns_count(self):
        src = read_stdin(8) + "MOV R1, R0\nLOADI R0, 0\nSYSCALL"
        assert explore(src, "abc").reasons == {"Exit(3)": 1}

    def test_bad_fd(self):
        src = "LOADI R0, 1\nLOADI R1, 5\nLOADI R2, 0x20000\nLOADI R3, 1\nSYSCALL\nMOV R1, R0\nLOADI R0, 0\nSYSCALL"
        assert explore(src).reasons == {"Exit(4294967295)": 1}

    def test_unknown_syscall(self):
        assert list(explore("LOADI R0, 99\nSYSCALL").reasons) == ["InvalidInstruction"]

    def test_write_resolves_stdout(self, ws):
        src = read_stdin(2) + "LOADI R0, 2\nLOADI R1, 1\nLOADI R2, 0x20000\nLOADI R3, 2\nSYSCALL\nHALT"
        st = load_program(assemble(src), "++")
        x0 = st.context.os.stdin[0]
        st.constrain(x0.eq(ord("h")))
        st.constrain(st.context.os.stdin[1].eq(ord("i")))
        Engine(MiniVM(assemble(src)), EngineConfig(), ws).run([st])
        assert ws.read(0, "stdin", binary=True) == b"hi"
        assert ws.read(0, "stdout", binary=True) == b"hi"

    def test_symbolic_exit_code_one_policy(self):
        src = read_stdin(1) + "LOADI R2, 0x20000\nLOAD R1, [R2+0]\nLOADI R5, 3\nAND R1, R1, R5\nLOADI R0, 0\nSYSCALL"
        rep = explore(src, "+")
        # ONE policy for exit status: a single child, no fork
        assert rep.terminated == 1 and rep.forks == 0


class TestArgv:
    def test_argv_layout(self):
        st = load_program(assemble("HALT"), "", ["ab", "+c"])
        mem = st.context.memory
        argc = [b.value for b in mem.read_bytes(0x10000, 4)]
        assert argc == [2, 0, 0, 0]
        p0 = int.from_bytes(bytes(b.value for b in mem.read_bytes(0x10004, 4)), "little")
        assert [b.value for b in mem.read_bytes(p0, 3)] == list(b"ab\x00")
        p1 = int.from_bytes(bytes(b.value for b in mem.read_bytes(0x10008, 4)), "little")
        second = mem.read_bytes(p1, 3)
        assert second[0].name == "argv_1_0" and second[1:] == [E.bv(ord("c"), 8), E.bv(0, 8)]

    def test_argv_read_only(self):
        rep = explore("LOADI R1, 0x10000\nSTORE [R1+0], R1\nHALT", argv=["x"])
        assert rep.reasons == {"MemoryViolation(0x10000)": 1}


class TestConcreteReplay:
    def test_halt_trace(self):
        reason, trace, out = concrete_replay(assemble("HALT"), b"")
        assert str(reason) == "Exit(0)" and trace == [0x1000] and out == b""

    def test_eof_deterministic(self):
        img = assemble(read_stdin(4) + "MOV R1, R0\nLOADI R0, 0\nSYSCALL")
        a = concrete_replay(img, b"x")
        assert a == concrete_replay(img, b"x") and str(a[0]) == "Exit(1)"

    def test_corrupted_stdin_mismatch(self, ws):
        from programs import MAGIC4

        explore(MAGIC4.image, MAGIC4.stdin, workspace=ws)
        hit = next(i for i in ws.testcase_ids() if MAGIC4.bomb_address in trace_addresses(ws, i))
        assert replay_testcase(ws, hit, MAGIC4.image).match
        ws.testcase_path(hit, "stdin").write_bytes(b"\x00\x00\x00\x00")
        result = replay_testcase(ws, hit, MAGIC4.image)
        assert not result.match and result.describe().startswith("MISMATCH")


def _random_program(rng: random.Random) -> bytes:
    """Random straight-line-ish code with loads/stores into the data area and
    forward branches, ending in exit."""
    lines = [read_stdin(8), "LOADI R7, 0x20000\nLOAD R3, [R7+0]\nLOAD R4, [R7+4]\nLOADI R5, 0xFF\nAND R5, R3, R5"]
    n = rng.randrange(5, 40)
    for i in range(n):
        lines.append(f"l{i}:")
        k = rng.random()
        rd, a, b = rng.randrange(1, 8), rng.randrange(8), rng.randrange(8)
        if k < 0.45:
            op = rng.choice(["ADD", "SUB", "MUL", "XOR", "AND", "OR", "SHL", "SHR", "LTU"])
            lines.append(f"{op} R{rd}, R{a}, R{b}")
        elif k < 0.6:
            lines.append(f"LOADI R{rd}, {rng.getrandbits(32)}")
        elif k < 0.72:
            lines.append(f"LOADI R7, {0x20000 + rng.randrange(16)}\nLOAD R{rd}, [R7+0]")
        elif k < 0.82:
            lines.append(f"LOADI R7, {0x20000 + 4 * rng.randrange(16)}\nSTORE [R7+0], R{a}")
        elif k < 0.95 and i + 1 < n:
            cond = rng.choice([3, 4, 5]) if rng.random() < 0.5 else a
            lines.append(f"{rng.choice(['JZ', 'JNZ'])} R{cond}, l{rng.randrange(i + 1, n)}")
        else:
            lines.append("LOADI R0, 2\nLOADI R1, 1\nLOADI R2, 0x20000\nLOADI R3, 8\nSYSCALL")
    lines.append(f"l{n}:\nLOADI R0, 0\nSYSCALL")
    return assemble("\n".join(lines))


@pytest.mark.skipif(_speedups is None, reason="extension not built")
def test_compiled_run_concrete_matches_python():
    rng = random.Random(11)
    for _ in range(200):
        img = _random_program(rng)
        stdin = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 10)))
        assert _speedups.run_concrete(img, stdin) == py_run_concrete(img, stdin)
    for img in (bytes([0xFF]) + bytes(7), assemble("JMP 0"), assemble("a: JMP a")):
        assert _speedups.run_concrete(img, b"", b"", 1000) == py_run_concrete(img, b"", b"", 1000)


def test_symbolic_paths_replay_on_random_programs(tmp_path):
    """Every test case produced for a random program replays concretely."""
    from mcore.core.workspace import Workspace

    rng = random.Random(5)
    total = 0
    for k in range(30):
        img = _random_program(rng)
        ws = Workspace(tmp_path / f"w{k}")
        explore(img, "+" * 8, workspace=ws, max_states=200)
        for i in ws.testcase_ids():
            assert replay_testcase(ws, i, img).match, (k, i)
            total += 1
    assert total > 60
