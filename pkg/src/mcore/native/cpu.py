"""Symbolic MiniVM: machine context, instruction semantics, program loading."""

from __future__ import annotations

from typing import Optional, Sequence, Union

from mcore.core.events import ALL, INVALID_INSTRUCTION, Exit, Terminate, TerminationReason
from mcore.core.state import Context, State
from mcore.native import isa
from mcore.native.memory import CONCRETIZING, MemoryMap
from mcore.native.minios import MiniOS, parse_byte_spec
from mcore.smt import expression as E

PLATFORM = "minivm"
_ZERO = E.bv(0, 32)
_ONE = E.bv(1, 32)
_REG_NAMES = {f"R{i}": i for i in range(isa.NUM_REGS)}


class LoadError(ValueError):
    pass


class MiniVMContext(Context):
    """Registers R0-R7 (32-bit expressions), concrete pc, memory and OS.

    Registers are also reachable as attributes: ``ctx.R3``.
    """

    def __init__(self, memory: MemoryMap, os: MiniOS, pc: int = isa.CODE_BASE):
        super().__init__()
        self.regs = [_ZERO] * isa.NUM_REGS
        self.pc = pc
        self.memory = memory
        self.os = os
        self.argv: list = []

    def __getattr__(self, name):
        idx = _REG_NAMES.get(name)
        if idx is None:
            raise AttributeError(name)
        return self.regs[idx]

    def __setattr__(self, name, value):
        idx = _REG_NAMES.get(name)
        if idx is None:
            object.__setattr__(self, name, value)
            return
        if isinstance(value, int):
            value = E.bv(value, 32)
        self.regs[idx] = value

    def clone(self) -> "MiniVMContext":
        c = MiniVMContext.__new__(MiniVMContext)
        d = c.__dict__
        d["pending"] = dict(self.pending)
        d["regs"] = list(self.regs)
        d["pc"] = self.pc
        d["memory"] = self.memory.clone()
        d["os"] = self.os.clone()
        d["argv"] = self.argv
        return c

    def __getstate__(self):
        return self.__dict__

    def __setstate__(self, d):
        self.__dict__.update(d)


def _binop(op: int, a: E.Expression, b: E.Expression) -> E.Expression:
    if op == isa.ADD:
        return a + b
    if op == isa.SUB:
        return a - b
    if op == isa.MUL:
        return a * b
    if op == isa.XOR:
        return a ^ b
    if op == isa.AND:
        return a & b
    if op == isa.OR:
        return a | b
    if op == isa.SHL:
        return a << (b & 31)
    if op == isa.SHR:
        return a >> (b & 31)
    if op == isa.LTU:
        return E.ite(a.ult(b), _ONE, _ZERO)
    raise AssertionError(op)


_BINOPS = frozenset({isa.ADD, isa.SUB, isa.MUL, isa.XOR, isa.AND, isa.OR, isa.SHL, isa.SHR, isa.LTU})


class MiniVM:
    """Backend object handed to :class:`~mcore.core.engine.Engine`."""

    name = PLATFORM

    def __init__(self, image: bytes = b""):
        self.image = image

    # -- engine protocol -------------------------------------------------------------
    def location(self, state: State) -> int:
        return state.context.pc

    def execute(self, state: State) -> None:
        ctx: MiniVMContext = state.context
        pc = ctx.pc
        raw = ctx.memory.fetch(pc, isa.INSN_SIZE)
        try:
            insn = isa.decode(raw)
        except isa.DecodeError as exc:
            raise Terminate(TerminationReason(INVALID_INSTRUCTION), f"{pc:#x}: {exc}") from None
        op = insn.opcode
        regs = ctx.regs
        next_pc = (pc + isa.INSN_SIZE) & 0xFFFFFFFF
        if op in _BINOPS:
            regs[insn.rd] = _binop(op, regs[insn.rs1], regs[insn.rs2])
        elif op == isa.LOADI:
            regs[insn.rd] = E.bv(insn.imm, 32)
        elif op == isa.MOV:
            regs[insn.rd] = regs[insn.rs1]
        elif op == isa.LOAD:
            regs[insn.rd] = ctx.memory.read(state, regs[insn.rs1] + insn.imm, 4)
        elif op == isa.STORE:
            ctx.memory.write(state, regs[insn.rs1] + insn.imm, regs[insn.rs2], 4)
        elif op == isa.JMP:
            next_pc = insn.imm
        elif op in (isa.JZ, isa.JNZ):
            is_zero = ctx.concretize(regs[insn.rs1].eq(0), ALL, "branch condition")
            if is_zero == (op == isa.JZ):
                next_pc = insn.imm
        elif op == isa.SYSCALL:
            ctx.os.syscall(state)
        elif op == isa.HALT:
            raise Terminate(Exit(0))
        ctx.pc = next_pc
        state.publish("did_execute_instruction", pc, insn)

    def format_trace(self, trace) -> str:
        return "".join(f"{loc:#010x}\n" for loc in trace)

    def testcase_files(self, state: State, model: dict) -> dict:
        from mcore.smt.evaluate import evaluate

        ctx: MiniVMContext = state.context

        def resolve(b):
            return b if isinstance(b, int) else evaluate(b, model)

        stdin = bytes(resolve(b) for b in ctx.os.stdin)
        stdout = bytes(evaluate(b, model) for b in ctx.os.stdout)
        argv = "".join(bytes(resolve(b) for b in arg).hex() + "\n" for arg in ctx.argv)
        return {"stdin": stdin, "stdout": stdout, "argv": argv}


def load_program(
    image: bytes,
    stdin: Union[str, bytes, Sequence[Optional[int]], None] = None,
    argv: Optional[Sequence] = None,
    memory_model: str = CONCRETIZING,
) -> State:
    """Initial state: code at 0x1000, zeroed data area, stdin and argv from byte specs.

    ``stdin`` and each ``argv`` entry are byte specs: a string/bytes where
    ``+`` is a symbolic byte, or a list of ints with ``None`` for symbolic.
    A non-empty ``argv`` maps a read-only area at 0x10000 holding argc,
    the pointer table and the NUL-terminated strings.
    """
    image = bytes(image)
    if len(image) % isa.INSN_SIZE:
        raise LoadError("image length must be a multiple of 8")
    if isa.CODE_BASE + len(image) > isa.CODE_LIMIT:
        raise LoadError(f"image of {len(image)} bytes does not fit the code area")
    mem = MemoryMap(memory_model)
    if image:
        mem.map(isa.CODE_BASE, len(image), "rx", "code", image)
    mem.map(isa.DATA_BASE, isa.DATA_SIZE, "rw", "data")
    state = State(None, platform=PLATFORM)

    def spec(s):
        if s is None:
            return []
        return parse_byte_spec(s) if isinstance(s, (str, bytes)) else list(s)

    stdin_bytes = []
    for i, b in enumerate(spec(stdin)):
        stdin_bytes.append(b if b is not None else state.new_symbolic_value(8, f"stdin_{i}", ("stdin", i)))

    args = []
    for j, arg in enumerate(argv or []):
        args.append([b if b is not None else state.new_symbolic_value(8, f"argv_{j}_{i}", ("argv", j, i)) for i, b in enumerate(spec(arg))])
    if args:
        layout = isa.argv_image([bytes(len(a)) for a in args])
        cells = list(layout)
        pos = 4 + 4 * len(args)
        for a in args:
            for i, b in enumerate(a):
                cells[pos + i] = b
            pos += len(a) + 1
        mem.map(isa.ARGV_BASE, isa.ARGV_SIZE, "r", "argv", cells)

    ctx = MiniVMContext(mem, MiniOS(stdin_bytes))
    ctx.argv = args
    state.context = ctx
    return state
