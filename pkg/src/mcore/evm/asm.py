"""Minimal EVM assembler for hand-written fixtures.

Whitespace separated tokens: mnemonics, ``label:`` definitions, and
``PUSHn <value>`` where the value is an integer or a label.  A bare
``PUSH <label>`` picks PUSH2.
"""

from __future__ import annotations

from mcore.evm.opcodes import BY_NAME


class EVMAsmError(ValueError):
    pass


def _tokens(source: str) -> list:
    out = []
    for line in source.splitlines():
        line = line.split(";", 1)[0].split("//", 1)[0]
        out.extend(line.split())
    return out


def assemble(source: str) -> bytes:
    toks = _tokens(source)
    # pass 1: sizes and labels
    labels = {}
    items = []
    pc = 0
    i = 0
    while i < len(toks):
        t = toks[i]
        if t.endswith(":"):
            labels[t[:-1]] = pc
            i += 1
            continue
        name = t.upper()
        if name == "PUSH":
            name = "PUSH2"
        if name not in BY_NAME:
            raise EVMAsmError(f"unknown mnemonic {t!r}")
        if name.startswith("PUSH"):
            if i + 1 >= len(toks):
                raise EVMAsmError(f"{name} needs an operand")
            items.append((name, toks[i + 1]))
            pc += 1 + int(name[4:])
            i += 2
        else:
            items.append((name, None))
            pc += 1
            i += 1
    out = bytearray()
    for name, operand in items:
        out.append(BY_NAME[name])
        if operand is not None:
            n = int(name[4:])
            value = labels[operand] if operand in labels else int(operand, 0)
            if value >= 1 << (8 * n):
                raise EVMAsmError(f"{operand} does not fit in {name}")
            out += value.to_bytes(n, "big")
    return bytes(out)
