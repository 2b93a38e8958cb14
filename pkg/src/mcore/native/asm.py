"""Two-pass text assembler for MiniVM, used to build fixtures.

Syntax, one instruction per line (``;`` or ``#`` starts a comment)::

    start:
        LOADI R1, 0x41
        ADD   R2, R0, R1
        LOAD  R3, [R2+4]
        STORE [R2-8], R3
        JZ    R3, start
        SYSCALL
    table:
        .bytes 01 02 03 04        ; raw data, padded to 8 bytes
        .word  0xdeadbeef, table  ; little-endian 32-bit words

Immediates are integers (any Python base prefix), character literals
such as ``'A'``, labels, or ``label+N`` / ``label-N``.
"""

from __future__ import annotations

import re

from mcore.native import isa

_REG = re.compile(r"^[Rr]([0-7])$")
_MEM = re.compile(r"^\[\s*([Rr][0-9]+)\s*(?:([+-])\s*(.+?))?\s*\]$")

_FORMS = {
    "HALT": (),
    "SYSCALL": (),
    "LOADI": ("rd", "imm"),
    "MOV": ("rd", "rs1"),
    "ADD": ("rd", "rs1", "rs2"),
    "SUB": ("rd", "rs1", "rs2"),
    "MUL": ("rd", "rs1", "rs2"),
    "XOR": ("rd", "rs1", "rs2"),
    "AND": ("rd", "rs1", "rs2"),
    "OR": ("rd", "rs1", "rs2"),
    "SHL": ("rd", "rs1", "rs2"),
    "SHR": ("rd", "rs1", "rs2"),
    "LTU": ("rd", "rs1", "rs2"),
    "LOAD": ("rd", "mem"),
    "STORE": ("mem", "rs2"),
    "JMP": ("imm",),
    "JZ": ("rs1", "imm"),
    "JNZ": ("rs1", "imm"),
}


class AsmError(ValueError):
    pass


def _split_operands(text: str) -> list:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _strip_comment(line: str) -> str:
    # keep ';' and '#' inside character literals
    out, quoted = "", False
    for ch in line:
        if ch == "'":
            quoted = not quoted
        if not quoted and ch in ";#":
            break
        out += ch
    return out.strip()


def _value(token: str, labels: dict, lineno: int) -> int:
    token = token.strip()
    m = re.match(r"^([A-Za-z_.][\w.]*)\s*([+-])\s*(.+)$", token)
    if m and m.group(1) in labels:
        off = _value(m.group(3), labels, lineno)
        return labels[m.group(1)] + (off if m.group(2) == "+" else -off)
    if token in labels:
        return labels[token]
    if len(token) == 3 and token[0] == token[2] == "'":
        return ord(token[1])
    try:
        return int(token, 0)
    except ValueError:
        raise AsmError(f"line {lineno}: bad immediate {token!r}") from None


def _reg(token: str, lineno: int) -> int:
    m = _REG.match(token.strip())
    if not m:
        raise AsmError(f"line {lineno}: expected register R0-R7, got {token!r}")
    return int(m.group(1))


def _items(source: str):
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = _strip_comment(raw)
        while True:
            m = re.match(r"^([A-Za-z_.][\w.]*):\s*(.*)$", line)
            if not m:
                break
            yield lineno, "label", m.group(1)
            line = m.group(2)
        if line:
            yield lineno, "stmt", line


def _data_size(stmt: str) -> int:
    head, _, rest = stmt.partition(" ")
    if head == ".bytes":
        n = len(rest.split())
    else:
        n = 4 * len(_split_operands(rest))
    return (n + 7) // 8 * 8


def symbols(source: str, base: int = isa.CODE_BASE) -> dict:
    """Label name -> address."""
    labels: dict = {}
    addr = base
    for lineno, kind, text in _items(source):
        if kind == "label":
            if text in labels:
                raise AsmError(f"line {lineno}: duplicate label {text!r}")
            labels[text] = addr
        elif text.startswith("."):
            addr += _data_size(text)
        else:
            addr += isa.INSN_SIZE
    return labels


def assemble(source: str, base: int = isa.CODE_BASE) -> bytes:
    labels = symbols(source, base)
    out = bytearray()
    for lineno, kind, text in _items(source):
        if kind == "label":
            continue
        head, _, rest = text.partition(" ")
        if head == ".bytes":
            data = bytes(int(t, 16) for t in rest.split())
        elif head == ".word":
            data = b"".join((_value(t, labels, lineno) & 0xFFFFFFFF).to_bytes(4, "little") for t in _split_operands(rest))
        elif head.startswith("."):
            raise AsmError(f"line {lineno}: unknown directive {head}")
        else:
            data = isa.encode(_instruction(head.upper(), _split_operands(rest), labels, lineno))
        out += data + bytes(-len(data) % 8)
    return bytes(out)


def _instruction(mnemonic: str, ops: list, labels: dict, lineno: int) -> isa.Instruction:
    if mnemonic not in _FORMS:
        raise AsmError(f"line {lineno}: unknown mnemonic {mnemonic}")
    form = _FORMS[mnemonic]
    if len(ops) != len(form):
        raise AsmError(f"line {lineno}: {mnemonic} takes {len(form)} operands")
    fields = {"rd": 0, "rs1": 0, "rs2": 0, "imm": 0}
    for slot, tok in zip(form, ops):
        if slot == "imm":
            fields["imm"] = _value(tok, labels, lineno) & 0xFFFFFFFF
        elif slot == "mem":
            m = _MEM.match(tok)
            if not m:
                raise AsmError(f"line {lineno}: bad memory operand {tok!r}")
            fields["rs1"] = _reg(m.group(1), lineno)
            off = _value(m.group(3), labels, lineno) if m.group(3) else 0
            fields["imm"] = (off if m.group(2) != "-" else -off) & 0xFFFFFFFF
        else:
            fields[slot] = _reg(tok, lineno)
    return isa.Instruction(isa.OPCODES[mnemonic], fields["rd"], fields["rs1"], fields["rs2"], fields["imm"])


def disassemble(image: bytes, base: int = isa.CODE_BASE) -> list:
    out = []
    for off in range(0, len(image) - len(image) % 8, 8):
        try:
            out.append((base + off, str(isa.decode(image[off : off + 8]))))
        except isa.DecodeError as exc:
            out.append((base + off, f"<{exc}>"))
    return out
