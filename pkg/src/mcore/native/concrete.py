"""Solver-free MiniVM interpreter (pure Python reference kernel).

Same semantics and fault taxonomy as the symbolic CPU; used to replay
generated test cases.  The compiled twin lives in ``mcore._speedups``.
"""

from __future__ import annotations

ARGV_BASE = 0x10000
ARGV_SIZE = 0x10000
DATA_BASE = 0x20000
DATA_SIZE = 0x10000
CODE_BASE = 0x1000
M32 = 0xFFFFFFFF


def run_concrete(image: bytes, stdin: bytes, argv_blob: bytes = b"", max_steps: int = 10_000_000):
    """Run to termination.

    Returns ``(kind, detail, trace, stdout)`` where ``kind`` is one of
    ``Exit``, ``MemoryViolation``, ``InvalidInstruction`` or ``StepLimit``.
    """
    code = bytes(image)
    code_end = CODE_BASE + len(code)
    data = bytearray(DATA_SIZE)
    argv = bytes(argv_blob)
    has_argv = len(argv) > 0
    regs = [0] * 8
    pc = CODE_BASE
    cursor = 0
    stdout = bytearray()
    trace = []

    def readable(addr, size):
        # -> (buffer, offset) or None
        if CODE_BASE <= addr and addr + size <= code_end:
            return code, addr - CODE_BASE
        if has_argv and ARGV_BASE <= addr and addr + size <= ARGV_BASE + ARGV_SIZE:
            off = addr - ARGV_BASE
            if off + size <= len(argv):
                return argv, off
            return argv + bytes(off + size - len(argv)), off
        if DATA_BASE <= addr and addr + size <= DATA_BASE + DATA_SIZE:
            return data, addr - DATA_BASE
        return None

    def writable(addr, size):
        return DATA_BASE <= addr and addr + size <= DATA_BASE + DATA_SIZE

    steps = 0
    while True:
        if steps >= max_steps:
            return "StepLimit", None, trace, bytes(stdout)
        steps += 1
        trace.append(pc)
        if not (CODE_BASE <= pc and pc + 8 <= code_end):
            return "MemoryViolation", pc, trace, bytes(stdout)
        off = pc - CODE_BASE
        op = code[off]
        rd = code[off + 1]
        rs1 = code[off + 2]
        rs2 = code[off + 3]
        imm = int.from_bytes(code[off + 4 : off + 8], "little")
        if op > 0x11 or rd > 7 or rs1 > 7 or rs2 > 7:
            return "InvalidInstruction", None, trace, bytes(stdout)
        nxt = (pc + 8) & M32
        a = regs[rs1]
        b = regs[rs2]
        if op == 0x00:
            return "Exit", 0, trace, bytes(stdout)
        elif op == 0x01:
            regs[rd] = imm
        elif op == 0x02:
            regs[rd] = a
        elif op == 0x03:
            regs[rd] = (a + b) & M32
        elif op == 0x04:
            regs[rd] = (a - b) & M32
        elif op == 0x05:
            regs[rd] = (a * b) & M32
        elif op == 0x06:
            regs[rd] = a ^ b
        elif op == 0x07:
            regs[rd] = a & b
        elif op == 0x08:
            regs[rd] = a | b
        elif op == 0x09:
            regs[rd] = (a << (b & 31)) & M32
        elif op == 0x0A:
            regs[rd] = a >> (b & 31)
        elif op == 0x0B:
            addr = (a + imm) & M32
            loc = readable(addr, 4)
            if loc is None:
                return "MemoryViolation", addr, trace, bytes(stdout)
            buf, o = loc
            regs[rd] = int.from_bytes(buf[o : o + 4], "little")
        elif op == 0x0C:
            addr = (a + imm) & M32
            if not writable(addr, 4):
                return "MemoryViolation", addr, trace, bytes(stdout)
            o = addr - DATA_BASE
            data[o : o + 4] = b.to_bytes(4, "little")
        elif op == 0x0D:
            nxt = imm
        elif op == 0x0E:
            if a == 0:
                nxt = imm
        elif op == 0x0F:
            if a != 0:
                nxt = imm
        elif op == 0x10:
            regs[rd] = 1 if a < b else 0
        else:
            num = regs[0]
            if num == 0:
                return "Exit", regs[1], trace, bytes(stdout)
            if num == 1:
                fd, buf_addr, length = regs[1], regs[2], regs[3]
                if fd != 0:
                    regs[0] = M32
                else:
                    n = min(length, len(stdin) - cursor)
                    if n > 0:
                        if not writable(buf_addr, n):
                            return "MemoryViolation", buf_addr, trace, bytes(stdout)
                        o = buf_addr - DATA_BASE
                        data[o : o + n] = stdin[cursor : cursor + n]
                        cursor += n
                    regs[0] = n
            elif num == 2:
                fd, buf_addr, length = regs[1], regs[2], regs[3]
                if fd != 1:
                    regs[0] = M32
                else:
                    if length > 0:
                        loc = readable(buf_addr, length)
                        if loc is None:
                            return "MemoryViolation", buf_addr, trace, bytes(stdout)
                        buf, o = loc
                        stdout += buf[o : o + length]
                    regs[0] = length
            else:
                return "InvalidInstruction", None, trace, bytes(stdout)
        pc = nxt
