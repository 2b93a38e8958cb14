"""MiniVM instruction set: fixed 8-byte little-endian encoding.

    byte 0    opcode
    byte 1    rd
    byte 2    rs1
    byte 3    rs2
    bytes 4-7 imm32
"""

from __future__ import annotations

import struct
from typing import NamedTuple

INSN_SIZE = 8
NUM_REGS = 8

HALT = 0x00
LOADI = 0x01
MOV = 0x02
ADD = 0x03
SUB = 0x04
MUL = 0x05
XOR = 0x06
AND = 0x07
OR = 0x08
SHL = 0x09
SHR = 0x0A
LOAD = 0x0B
STORE = 0x0C
JMP = 0x0D
JZ = 0x0E
JNZ = 0x0F
LTU = 0x10
SYSCALL = 0x11

MNEMONICS = {
    HALT: "HALT",
    LOADI: "LOADI",
    MOV: "MOV",
    ADD: "ADD",
    SUB: "SUB",
    MUL: "MUL",
    XOR: "XOR",
    AND: "AND",
    OR: "OR",
    SHL: "SHL",
    SHR: "SHR",
    LOAD: "LOAD",
    STORE: "STORE",
    JMP: "JMP",
    JZ: "JZ",
    JNZ: "JNZ",
    LTU: "LTU",
    SYSCALL: "SYSCALL",
}
OPCODES = {v: k for k, v in MNEMONICS.items()}

# syscall numbers (in R0)
SYS_EXIT = 0
SYS_READ = 1
SYS_WRITE = 2

# memory layout
CODE_BASE = 0x1000
CODE_LIMIT = 0x10000  # images must fit below the argv area
ARGV_BASE = 0x10000
ARGV_SIZE = 0x10000
DATA_BASE = 0x20000
DATA_SIZE = 0x10000


class DecodeError(ValueError):
    pass


class Instruction(NamedTuple):
    opcode: int
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0

    @property
    def mnemonic(self) -> str:
        return MNEMONICS[self.opcode]

    def __str__(self):
        return f"{self.mnemonic} rd=R{self.rd} rs1=R{self.rs1} rs2=R{self.rs2} imm={self.imm:#x}"


def decode(raw: bytes) -> Instruction:
    if len(raw) != INSN_SIZE:
        raise DecodeError(f"need {INSN_SIZE} bytes, got {len(raw)}")
    op, rd, rs1, rs2, imm = struct.unpack("<BBBBI", raw)
    if op not in MNEMONICS:
        raise DecodeError(f"unknown opcode {op:#04x}")
    if rd >= NUM_REGS or rs1 >= NUM_REGS or rs2 >= NUM_REGS:
        raise DecodeError("register index out of range")
    return Instruction(op, rd, rs1, rs2, imm)


def encode(insn: Instruction) -> bytes:
    return struct.pack("<BBBBI", insn.opcode, insn.rd, insn.rs1, insn.rs2, insn.imm & 0xFFFFFFFF)


def argv_image(args) -> bytes:
    """Contents of the argv area: argc, pointer table, NUL-terminated strings.

    ``args`` is a list of concrete byte strings.
    """
    argc = len(args)
    table = 4 + 4 * argc
    ptrs = []
    blob = b""
    for a in args:
        ptrs.append(ARGV_BASE + table + len(blob))
        blob += bytes(a) + b"\0"
    out = struct.pack("<I", argc) + b"".join(struct.pack("<I", p) for p in ptrs) + blob
    if len(out) > ARGV_SIZE:
        raise ValueError("argv does not fit in the argv area")
    return out
