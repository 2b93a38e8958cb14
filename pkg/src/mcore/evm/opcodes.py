"""Supported EVM opcode subset with stack effects and the flat gas table."""

from __future__ import annotations

from typing import NamedTuple


class OpInfo(NamedTuple):
    mnemonic: str
    pops: int
    pushes: int
    gas: int
    immediate: int = 0


_VERYLOW = 3
_BASE = 1

_TABLE = {
    0x00: ("STOP", 0, 0, _BASE),
    0x01: ("ADD", 2, 1, _VERYLOW),
    0x02: ("MUL", 2, 1, _VERYLOW),
    0x03: ("SUB", 2, 1, _VERYLOW),
    0x04: ("DIV", 2, 1, _VERYLOW),
    0x05: ("SDIV", 2, 1, _VERYLOW),
    0x06: ("MOD", 2, 1, _VERYLOW),
    0x07: ("SMOD", 2, 1, _VERYLOW),
    0x10: ("LT", 2, 1, _VERYLOW),
    0x11: ("GT", 2, 1, _VERYLOW),
    0x12: ("SLT", 2, 1, _VERYLOW),
    0x13: ("SGT", 2, 1, _VERYLOW),
    0x14: ("EQ", 2, 1, _VERYLOW),
    0x15: ("ISZERO", 1, 1, _VERYLOW),
    0x16: ("AND", 2, 1, _VERYLOW),
    0x17: ("OR", 2, 1, _VERYLOW),
    0x18: ("XOR", 2, 1, _VERYLOW),
    0x19: ("NOT", 1, 1, _VERYLOW),
    0x1A: ("BYTE", 2, 1, _VERYLOW),
    0x1B: ("SHL", 2, 1, _VERYLOW),
    0x1C: ("SHR", 2, 1, _VERYLOW),
    0x1D: ("SAR", 2, 1, _VERYLOW),
    0x20: ("SHA3", 2, 1, 30),
    0x30: ("ADDRESS", 0, 1, _BASE),
    0x31: ("BALANCE", 1, 1, _BASE),
    0x33: ("CALLER", 0, 1, _BASE),
    0x34: ("CALLVALUE", 0, 1, _BASE),
    0x35: ("CALLDATALOAD", 1, 1, _BASE),
    0x36: ("CALLDATASIZE", 0, 1, _BASE),
    0x37: ("CALLDATACOPY", 3, 0, _BASE),
    0x38: ("CODESIZE", 0, 1, _BASE),
    0x39: ("CODECOPY", 3, 0, _BASE),
    0x3D: ("RETURNDATASIZE", 0, 1, _BASE),
    0x3E: ("RETURNDATACOPY", 3, 0, _BASE),
    0x50: ("POP", 1, 0, _VERYLOW),
    0x51: ("MLOAD", 1, 1, _BASE),
    0x52: ("MSTORE", 2, 0, _BASE),
    0x53: ("MSTORE8", 2, 0, _BASE),
    0x54: ("SLOAD", 1, 1, 200),
    0x55: ("SSTORE", 2, 0, 5000),
    0x56: ("JUMP", 1, 0, _BASE),
    0x57: ("JUMPI", 2, 0, _BASE),
    0x58: ("PC", 0, 1, _BASE),
    0x59: ("MSIZE", 0, 1, _BASE),
    0x5A: ("GAS", 0, 1, _BASE),
    0x5B: ("JUMPDEST", 0, 0, _BASE),
    0xF1: ("CALL", 7, 1, 700),
    0xF3: ("RETURN", 2, 0, _BASE),
    0xFD: ("REVERT", 2, 0, _BASE),
}

OPCODES = {op: OpInfo(*row) for op, row in _TABLE.items()}
for _n in range(1, 33):
    OPCODES[0x5F + _n] = OpInfo(f"PUSH{_n}", 0, 1, _VERYLOW, _n)
for _n in range(1, 17):
    OPCODES[0x7F + _n] = OpInfo(f"DUP{_n}", _n, _n + 1, _VERYLOW)
    OPCODES[0x8F + _n] = OpInfo(f"SWAP{_n}", _n + 1, _n + 1, _VERYLOW)

BY_NAME = {info.mnemonic: op for op, info in OPCODES.items()}

SHA3_WORD_GAS = 6
DEFAULT_GAS_BUDGET = 10_000_000
MAX_STACK = 1024
MAX_CALL_DEPTH = 64


def instruction_offsets(code: bytes) -> list:
    """Offsets that start an instruction; PUSH immediates are skipped.

    Unknown bytes still count as (invalid) one-byte instructions.
    """
    out = []
    pc = 0
    while pc < len(code):
        out.append(pc)
        info = OPCODES.get(code[pc])
        pc += 1 + (info.immediate if info else 0)
    return out


def jumpdests(code: bytes) -> frozenset:
    return frozenset(pc for pc in instruction_offsets(code) if code[pc] == 0x5B)


def disassemble(code: bytes) -> list:
    out = []
    for pc in instruction_offsets(code):
        info = OPCODES.get(code[pc])
        if info is None:
            out.append((pc, f"INVALID_{code[pc]:02X}", None))
        elif info.immediate:
            out.append((pc, info.mnemonic, int.from_bytes(code[pc + 1 : pc + 1 + info.immediate].ljust(info.immediate, b"\0"), "big")))
        else:
            out.append((pc, info.mnemonic, None))
    return out
