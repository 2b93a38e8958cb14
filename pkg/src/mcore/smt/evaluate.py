"""Concrete evaluation of expressions under an assignment.

``apply`` holds the semantics of every operation kind (SMT-LIB division
conventions included) and is what constant folding uses.  ``evaluate``
walks a whole term; variables missing from the model evaluate to zero,
which is the model-completion rule used for test-case generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from mcore.smt import expression as E


@dataclass(frozen=True)
class ArrayValue:
    default: int
    entries: Mapping[int, int] = field(default_factory=dict)

    def get(self, index: int) -> int:
        return self.entries.get(index, self.default)

    def set(self, index: int, value: int) -> "ArrayValue":
        entries = dict(self.entries)
        entries[index] = value
        return ArrayValue(self.default, entries)

    def __eq__(self, other):
        if not isinstance(other, ArrayValue):
            return NotImplemented
        keys = set(self.entries) | set(other.entries)
        return self.default == other.default and all(self.get(k) == other.get(k) for k in keys)

    def __hash__(self):
        return hash(self.default)


def to_signed(value: int, width: int) -> int:
    return value - (1 << width) if value >> (width - 1) else value


def _udiv(a, b, mask):
    return mask if b == 0 else a // b


def _urem(a, b):
    return a if b == 0 else a % b


def _sdiv(a, b, w, mask):
    neg_a, neg_b = a >> (w - 1), b >> (w - 1)
    ua = (-a) & mask if neg_a else a
    ub = (-b) & mask if neg_b else b
    q = _udiv(ua, ub, mask)
    return (-q) & mask if neg_a != neg_b else q


def _srem(a, b, w, mask):
    neg_a, neg_b = a >> (w - 1), b >> (w - 1)
    ua = (-a) & mask if neg_a else a
    ub = (-b) & mask if neg_b else b
    r = _urem(ua, ub)
    return (-r) & mask if neg_a else r


def apply(kind: str, params: tuple, values: list, operand_sorts: list, sort: E.Sort):
    """Apply one operation to concrete operand values."""
    if kind in E.BV_BINARY or kind in E.BV_COMPARE or kind in E.BV_UNARY:
        w = operand_sorts[0].width
        mask = (1 << w) - 1
        a = values[0]
        if kind == E.BVNOT:
            return a ^ mask
        if kind == E.BVNEG:
            return (-a) & mask
        b = values[1]
        if kind == E.BVADD:
            return (a + b) & mask
        if kind == E.BVSUB:
            return (a - b) & mask
        if kind == E.BVMUL:
            return (a * b) & mask
        if kind == E.BVUDIV:
            return _udiv(a, b, mask)
        if kind == E.BVUREM:
            return _urem(a, b)
        if kind == E.BVSDIV:
            return _sdiv(a, b, w, mask)
        if kind == E.BVSREM:
            return _srem(a, b, w, mask)
        if kind == E.BVAND:
            return a & b
        if kind == E.BVOR:
            return a | b
        if kind == E.BVXOR:
            return a ^ b
        if kind == E.BVSHL:
            return (a << b) & mask if b < w else 0
        if kind == E.BVLSHR:
            return a >> b if b < w else 0
        if kind == E.BVASHR:
            return (to_signed(a, w) >> min(b, w)) & mask
        if kind == E.BVULT:
            return a < b
        if kind == E.BVULE:
            return a <= b
        if kind == E.BVSLT:
            return to_signed(a, w) < to_signed(b, w)
        if kind == E.BVSLE:
            return to_signed(a, w) <= to_signed(b, w)
    if kind == E.EQ:
        return values[0] == values[1]
    if kind == E.NOT:
        return not values[0]
    if kind == E.AND:
        return all(values)
    if kind == E.OR:
        return any(values)
    if kind == E.ITE:
        return values[1] if values[0] else values[2]
    if kind == E.CONCAT:
        acc = 0
        for v, s in zip(values, operand_sorts):
            acc = (acc << s.width) | v
        return acc
    if kind == E.EXTRACT:
        hi, lo = params
        return (values[0] >> lo) & ((1 << (hi - lo + 1)) - 1)
    if kind == E.ZEXT:
        return values[0]
    if kind == E.SEXT:
        w = operand_sorts[0].width
        return to_signed(values[0], w) & ((1 << sort.width) - 1)
    if kind == E.SELECT:
        return values[0].get(values[1])
    if kind == E.STORE:
        return values[0].set(values[1], values[2])
    raise E.ExpressionError(f"cannot evaluate {kind!r}")


def evaluate(expr: E.Expression, model: Mapping[str, object] = None, default: int = 0):
    """Evaluate ``expr``; bit-vectors give ints, Bools give bools."""
    model = model or {}
    memo: dict = {}
    stack = [expr]
    while stack:
        node = stack[-1]
        key = id(node)
        if key in memo:
            stack.pop()
            continue
        if isinstance(node, E.Constant):
            memo[key] = ArrayValue(node.value) if node.sort.is_array else node.value
            stack.pop()
            continue
        if isinstance(node, E.Variable):
            v = model.get(node.name)
            if v is None:
                if node.sort.is_bool:
                    v = False
                elif node.sort.is_array:
                    v = ArrayValue(default)
                else:
                    v = default
            memo[key] = v
            stack.pop()
            continue
        pending = [op for op in node.operands if id(op) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        memo[key] = apply(
            node.kind,
            node.params,
            [memo[id(op)] for op in node.operands],
            [op.sort for op in node.operands],
            node.sort,
        )
    return memo[id(expr)]
