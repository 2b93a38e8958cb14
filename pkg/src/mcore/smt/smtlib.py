"""SMT-LIB 2 text: term printing, script generation and a reader.

The reader understands the subset the printer emits (plus ``declare-const``
and indexed ``(_ bvN w)`` literals), which is what state serialization and
the test-case ``.smt`` files need.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Iterable, Optional

from mcore.smt import expression as E

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z_~!@$%^&*+=<>.?/\-][A-Za-z0-9_~!@$%^&*+=<>.?/\-]*$")


def symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def sort_text(sort: E.Sort) -> str:
    if sort.is_bool:
        return "Bool"
    if sort.is_bv:
        return f"(_ BitVec {sort.width})"
    return f"(Array (_ BitVec {sort.index_width}) (_ BitVec {sort.value_width}))"


def literal(value: int, width: int) -> str:
    if width % 4 == 0:
        return "#x" + format(value, f"0{width // 4}x")
    return "#b" + format(value, f"0{width}b")


def _constant_text(c: E.Constant) -> str:
    if c.sort.is_bool:
        return "true" if c.value else "false"
    if c.sort.is_bv:
        return literal(c.value, c.sort.width)
    return f"((as const {sort_text(c.sort)}) {literal(c.value, c.sort.value_width)})"


def _head(node: E.Operation) -> str:
    if node.kind == E.EXTRACT:
        return f"(_ extract {node.params[0]} {node.params[1]})"
    if node.kind in (E.ZEXT, E.SEXT):
        return f"(_ {node.kind} {node.params[0]})"
    return node.kind


def _binary_concat(node: E.Operation):
    # SMT-LIB concat is binary; fold right
    ops = node.operands
    if len(ops) <= 2:
        return ops
    rest = E.raw_operation(E.CONCAT, ops[1:])
    return (ops[0], rest)


def term(expr: E.Expression) -> str:
    """Print one term, binding repeated subterms with ``let``."""
    # keys are the nodes themselves: equality is structural and hashes are cached
    counts: Counter = Counter()
    order: list = []
    split: dict = {}

    def children(node):
        if node.kind != E.CONCAT:
            return node.operands
        if node not in split:
            split[node] = _binary_concat(node)
        return split[node]

    stack = [(expr, False)]
    while stack:
        node, done = stack.pop()
        if not isinstance(node, E.Operation):
            continue
        if done:
            order.append(node)
            continue
        counts[node] += 1
        if counts[node] > 1:
            continue
        stack.append((node, True))
        for op in reversed(children(node)):
            stack.append((op, False))

    names: dict = {}
    rendered: dict = {}

    def render(node) -> str:
        if isinstance(node, E.Constant):
            return _constant_text(node)
        if isinstance(node, E.Variable):
            return symbol(node.name)
        name = names.get(node)
        return name if name is not None else rendered[node]

    bindings = []
    for node in order:
        text = f"({_head(node)} {' '.join(render(op) for op in children(node))})"
        if counts[node] > 1 and node is not expr:
            name = f"?t{len(bindings)}"
            bindings.append((name, text))
            names[node] = name
        else:
            rendered[node] = text
    body = render(expr)
    for name, text in reversed(bindings):
        body = f"(let (({name} {text})) {body})"
    return body


def declaration(var: E.Variable) -> str:
    return f"(declare-fun {symbol(var.name)} () {sort_text(var.sort)})"


def to_smtlib(cs, extra: Optional[E.Expression] = None, logic: str = "QF_AUFBV") -> str:
    """Complete script: logic, declarations (sorted by name), asserts, check-sat."""
    variables = dict(cs.declarations)
    if extra is not None:
        for v in extra.variables:
            variables.setdefault(v.name, v)
    lines = [f"(set-logic {logic})"]
    for name in sorted(variables):
        lines.append(declaration(variables[name]))
    for a in cs.assertions:
        lines.append(f"(assert {term(a)})")
    if extra is not None:
        lines.append(f"(assert {term(extra)})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# -- reading ------------------------------------------------------------------

class ParseError(ValueError):
    pass


_TOKEN = re.compile(r'\s*(?:(;[^\n]*)|(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|";]+))')


def tokenize(text: str):
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                return
            raise ParseError(f"unexpected input at offset {pos}: {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(1):
            continue
        tok = m.group(2) or m.group(3) or m.group(4) or m.group(5) or m.group(6)
        if tok:
            yield tok


def read_sexprs(text: str) -> list:
    """Parse text into nested Python lists of string atoms."""
    stack: list = [[]]
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("unbalanced '('")
    return stack[0]


def _unquote(sym: str) -> str:
    return sym[1:-1] if sym.startswith("|") else sym


def parse_sort(sx) -> E.Sort:
    if sx == "Bool":
        return E.BOOL
    if isinstance(sx, list) and sx[:2] == ["_", "BitVec"]:
        return E.BitVecSort(int(sx[2]))
    if isinstance(sx, list) and sx and sx[0] == "Array":
        i, v = parse_sort(sx[1]), parse_sort(sx[2])
        return E.ArraySort(i.width, v.width)
    raise ParseError(f"unsupported sort {sx!r}")


def parse_literal(tok: str) -> Optional[E.Constant]:
    if tok == "true":
        return E.TRUE
    if tok == "false":
        return E.FALSE
    if tok.startswith("#x"):
        return E.make_constant(int(tok[2:], 16), 4 * (len(tok) - 2))
    if tok.startswith("#b"):
        return E.make_constant(int(tok[2:], 2), len(tok) - 2)
    return None


def parse_value(sx):
    """Concrete value from a get-value answer: int for bit-vectors, bool for Bool."""
    if isinstance(sx, list) and len(sx) == 3 and sx[0] == "_" and sx[1].startswith("bv"):
        return int(sx[1][2:])
    c = parse_literal(sx) if isinstance(sx, str) else None
    if c is None:
        raise ParseError(f"cannot read value {sx!r}")
    return c.value


_KIND_BY_NAME = {k: k for k in E.KINDS}


def parse_term(sx, env: dict, declared: dict) -> E.Expression:
    if isinstance(sx, str):
        if sx in env:
            return env[sx]
        c = parse_literal(sx)
        if c is not None:
            return c
        name = _unquote(sx)
        if name in declared:
            return declared[name]
        raise ParseError(f"undeclared symbol {sx!r}")
    if not sx:
        raise ParseError("empty application")
    head = sx[0]
    if head == "let":
        inner = dict(env)
        for name, value in sx[1]:
            inner[name] = parse_term(value, env, declared)
        return parse_term(sx[2], inner, declared)
    if isinstance(head, list):
        if head[0] == "_":
            if len(sx) == 1:
                raise ParseError(f"bad indexed term {sx!r}")
            op = head[1]
            args = [parse_term(a, env, declared) for a in sx[1:]]
            if op == "extract":
                return E.raw_operation(E.EXTRACT, args, (int(head[2]), int(head[3])))
            if op in (E.ZEXT, E.SEXT):
                return E.raw_operation(op, args, (int(head[2]),))
            raise ParseError(f"unsupported indexed operator {op!r}")
        if head[0] == "as" and head[1] == "const":
            sort = parse_sort(head[2])
            default = parse_term(sx[1], env, declared)
            return E.Constant(default.value, sort)
        raise ParseError(f"unsupported head {head!r}")
    if head == "_" and len(sx) == 3 and sx[1].startswith("bv"):
        return E.make_constant(int(sx[1][2:]), int(sx[2]))
    kind = _KIND_BY_NAME.get(head)
    if kind is None:
        raise ParseError(f"unsupported operator {head!r}")
    args = [parse_term(a, env, declared) for a in sx[1:]]
    if kind == E.CONCAT and isinstance(args[-1], E.Operation) and args[-1].kind == E.CONCAT:
        # undo the right fold applied when printing n-ary concats
        args = args[:-1] + list(args[-1].operands)
    return E.raw_operation(kind, args)


def parse_script(text: str):
    """Read declarations and assertions; returns (declared: dict, assertions: list)."""
    declared: dict = {}
    assertions: list = []
    for cmd in read_sexprs(text):
        if not isinstance(cmd, list) or not cmd:
            continue
        head = cmd[0]
        if head == "declare-fun":
            name = _unquote(cmd[1])
            if cmd[2]:
                raise ParseError("uninterpreted functions are not supported")
            declared[name] = E.Variable(name, parse_sort(cmd[3]))
        elif head == "declare-const":
            name = _unquote(cmd[1])
            declared[name] = E.Variable(name, parse_sort(cmd[2]))
        elif head == "assert":
            assertions.append(parse_term(cmd[1], {}, declared))
    return declared, assertions


def values_block(pairs: Iterable) -> str:
    """Render ``(name, sort, value)`` triples like a get-value answer."""
    out = []
    for name, sort, value in pairs:
        if sort.is_bool:
            out.append(f"({symbol(name)} {'true' if value else 'false'})")
        else:
            out.append(f"({symbol(name)} {literal(value, sort.width)})")
    return "(" + " ".join(out) + ")"
