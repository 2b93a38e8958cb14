"""Emulated exit/read/write system calls."""

from __future__ import annotations

from typing import List, Optional, Sequence, Union

from mcore.core.events import ALL, ONE, Exit, INVALID_INSTRUCTION, Terminate, TerminationReason
from mcore.native import isa
from mcore.smt import expression as E

ByteSpec = Optional[int]  # None marks a symbolic byte


def parse_byte_spec(text: Union[str, bytes]) -> List[ByteSpec]:
    """``"++.txt"`` -> ``[None, None, 0x2e, 0x74, 0x78, 0x74]``."""
    if isinstance(text, str):
        text = text.encode("latin-1")
    return [None if b == ord("+") else b for b in text]


class MiniOS:
    def __init__(self, stdin: Sequence[Union[int, E.Expression]] = ()):
        # each entry is a concrete int or the 8-bit Variable standing for it
        self.stdin: list = list(stdin)
        self.cursor = 0
        self.stdout: list = []
        self.exit_code: Optional[int] = None

    def clone(self) -> "MiniOS":
        o = MiniOS.__new__(MiniOS)
        o.stdin = self.stdin
        o.cursor = self.cursor
        o.stdout = list(self.stdout)
        o.exit_code = self.exit_code
        return o

    def stdin_expr(self, i: int) -> E.Expression:
        b = self.stdin[i]
        return E.bv(b, 8) if isinstance(b, int) else b

    def syscall(self, state) -> None:
        """Dispatch on R0.  Register arguments are concretized up front."""
        ctx = state.context
        num = ctx.concretize(ctx.regs[0], ONE, "syscall number")
        if num == isa.SYS_EXIT:
            code = ctx.concretize(ctx.regs[1], ONE, "exit status")
            self.exit_code = code
            raise Terminate(Exit(code))
        if num == isa.SYS_READ:
            self._read(state)
        elif num == isa.SYS_WRITE:
            self._write(state)
        else:
            raise Terminate(TerminationReason(INVALID_INSTRUCTION), f"unknown syscall {num}")

    def _args(self, state):
        ctx = state.context
        fd = ctx.concretize(ctx.regs[1], ONE, "syscall fd")
        length = ctx.concretize(ctx.regs[3], ONE, "syscall length")
        if not isinstance(ctx.regs[3], E.Constant):
            note = f"symbolic syscall length concretized to {length}"
            if note not in state.messages:
                state.messages.append(note)
        return fd, length

    def _read(self, state) -> None:
        ctx = state.context
        fd, length = self._args(state)
        if fd != 0:
            ctx.regs[0] = E.bv(0xFFFFFFFF, 32)
            return
        n = min(length, len(self.stdin) - self.cursor)
        if n > 0:
            buf = ctx.concretize(ctx.regs[2], ALL, "read buffer")
            data = [self.stdin_expr(self.cursor + i) for i in range(n)]
            ctx.memory.write_bytes(buf, data)
            state.publish("memory_write", E.bv(buf, 32), n, E.concat(*reversed(data)))
            self.cursor += n
        ctx.regs[0] = E.bv(n, 32)

    def _write(self, state) -> None:
        ctx = state.context
        fd, length = self._args(state)
        if fd != 1:
            ctx.regs[0] = E.bv(0xFFFFFFFF, 32)
            return
        if length > 0:
            buf = ctx.concretize(ctx.regs[2], ALL, "write buffer")
            data = ctx.memory.read_bytes(buf, length)
            state.publish("memory_read", E.bv(buf, 32), length, E.concat(*reversed(data)))
            self.stdout.extend(data)
        ctx.regs[0] = E.bv(length, 32)
