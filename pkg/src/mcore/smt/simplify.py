"""Rewrite rules.

:func:`rewrite` works on a single node whose operands are already
simplified; it is applied by :func:`mcore.smt.expression.make_operation`.
:func:`simplify` rebuilds a whole term bottom-up with the same rules.
Every rule preserves the value of the term under all assignments.
"""

from __future__ import annotations

from mcore.smt import expression as E
from mcore.smt.evaluate import ArrayValue, apply


def _c(value, sort):
    return E.Constant(value, sort)


def _ones(w):
    return (1 << w) - 1


def _is_c(e, value=None):
    return isinstance(e, E.Constant) and (value is None or e.value == value)


def _op(kind, *ops, params=()):
    return E.make_operation(kind, ops, params)


def _fold(node):
    values = []
    for op in node.operands:
        if op.sort.is_array:
            values.append(ArrayValue(op.value))
        else:
            values.append(op.value)
    out = apply(node.kind, node.params, values, [o.sort for o in node.operands], node.sort)
    if isinstance(out, ArrayValue):
        if out.entries and any(v != out.default for v in out.entries.values()):
            return node
        return _c(out.default, node.sort)
    return _c(out, node.sort)


def rewrite(node: E.Expression) -> E.Expression:
    if not isinstance(node, E.Operation):
        return node
    kind, ops = node.kind, node.operands
    if all(isinstance(o, E.Constant) for o in ops):
        return _fold(node)
    rule = _RULES.get(kind)
    if rule is None:
        return node
    out = rule(node, ops)
    return node if out is None else out


# -- bit-vector arithmetic ---------------------------------------------------

def _commute(node, ops):
    # constants go to the right for commutative operators
    if node.kind in E.COMMUTATIVE and len(ops) == 2 and _is_c(ops[0]) and not _is_c(ops[1]):
        return E.make_operation(node.kind, (ops[1], ops[0]), node.params)
    return None


def _bvadd(node, ops):
    a, b = ops
    r = _commute(node, ops)
    if r is not None:
        return r
    if _is_c(b, 0):
        return a
    if _is_c(b) and isinstance(a, E.Operation) and a.kind == E.BVADD and _is_c(a.operands[1]):
        w = node.sort.width
        return _op(E.BVADD, a.operands[0], _c((a.operands[1].value + b.value) & _ones(w), node.sort))
    return None


def _bvsub(node, ops):
    a, b = ops
    if _is_c(b, 0):
        return a
    if a == b:
        return _c(0, node.sort)
    if _is_c(b):
        return _op(E.BVADD, a, _c((-b.value) & _ones(node.sort.width), node.sort))
    return None


def _bvmul(node, ops):
    r = _commute(node, ops)
    if r is not None:
        return r
    a, b = ops
    if _is_c(b, 0):
        return b
    if _is_c(b, 1):
        return a
    return None


def _bvand(node, ops):
    r = _commute(node, ops)
    if r is not None:
        return r
    a, b = ops
    if _is_c(b, 0):
        return b
    if _is_c(b, _ones(node.sort.width)) or a == b:
        return a
    return None


def _bvor(node, ops):
    r = _commute(node, ops)
    if r is not None:
        return r
    a, b = ops
    if _is_c(b, 0) or a == b:
        return a
    if _is_c(b, _ones(node.sort.width)):
        return b
    return None


def _bvxor(node, ops):
    r = _commute(node, ops)
    if r is not None:
        return r
    a, b = ops
    if a == b:
        return _c(0, node.sort)
    if _is_c(b, 0):
        return a
    return None


def _shift(node, ops):
    a, b = ops
    w = node.sort.width
    if _is_c(b, 0):
        return a
    if not _is_c(b):
        return None
    k = b.value
    if node.kind == E.BVSHL:
        if k >= w:
            return _c(0, node.sort)
        return E.concat(_op(E.EXTRACT, a, params=(w - 1 - k, 0)), _c(0, E.BitVecSort(k)))
    if node.kind == E.BVLSHR:
        if k >= w:
            return _c(0, node.sort)
        return E.concat(_c(0, E.BitVecSort(k)), _op(E.EXTRACT, a, params=(w - 1, k)))
    return None


def _bvudiv(node, ops):
    if _is_c(ops[1], 1):
        return ops[0]
    return None


def _bvurem(node, ops):
    if _is_c(ops[1], 1):
        return _c(0, node.sort)
    return None


def _double_neg(node, ops):
    (a,) = ops
    if isinstance(a, E.Operation) and a.kind == node.kind:
        return a.operands[0]
    return None


def _compare(node, ops):
    a, b = ops
    if a == b:
        return E.BoolConstant(node.kind in (E.BVULE, E.BVSLE))
    if node.kind == E.BVULT and _is_c(b, 0):
        return E.FALSE
    if node.kind == E.BVULE and _is_c(a, 0):
        return E.TRUE
    if node.kind == E.BVULT and _is_c(a, _ones(a.sort.width)):
        return E.FALSE
    if node.kind == E.BVULE and _is_c(b, _ones(a.sort.width)):
        return E.TRUE
    return None


# -- equality / boolean --------------------------------------------------------

def _split_const(value, parts):
    # slice a constant into the widths of ``parts`` (most significant first)
    out = []
    shift = sum(p.sort.width for p in parts)
    for p in parts:
        shift -= p.sort.width
        out.append(_c((value >> shift) & _ones(p.sort.width), p.sort))
    return out


def _eq(node, ops):
    r = _commute(node, ops)
    if r is not None:
        return r
    a, b = ops
    if a == b:
        return E.TRUE
    if a.sort.is_bool and _is_c(b):
        return a if b.value else _op(E.NOT, a)
    if not _is_c(b) or a.sort.is_array:
        return None
    if isinstance(a, E.Operation):
        if a.kind == E.ITE and _is_c(a.operands[1]) and _is_c(a.operands[2]):
            c, x, y = a.operands
            tx, ty = x.value == b.value, y.value == b.value
            if tx and ty:
                return E.TRUE
            if tx:
                return c
            if ty:
                return _op(E.NOT, c)
            return E.FALSE
        if a.kind == E.ZEXT:
            inner = a.operands[0]
            if b.value >> inner.sort.width:
                return E.FALSE
            return _op(E.EQ, inner, _c(b.value, inner.sort))
        if a.kind == E.CONCAT:
            pieces = _split_const(b.value, a.operands)
            return E.and_(*(_op(E.EQ, p, k) for p, k in zip(a.operands, pieces)))
        if a.kind == E.BVXOR and _is_c(a.operands[1]):
            return _op(E.EQ, a.operands[0], _c(a.operands[1].value ^ b.value, b.sort))
        if a.kind == E.BVADD and _is_c(a.operands[1]):
            w = b.sort.width
            return _op(E.EQ, a.operands[0], _c((b.value - a.operands[1].value) & _ones(w), b.sort))
    return None


def _not(node, ops):
    (a,) = ops
    if isinstance(a, E.Operation) and a.kind == E.NOT:
        return a.operands[0]
    return None


def _andor(node, ops):
    is_and = node.kind == E.AND
    absorbing, neutral = (E.FALSE, E.TRUE) if is_and else (E.TRUE, E.FALSE)
    flat = []
    seen = set()
    changed = False
    for o in ops:
        if isinstance(o, E.Operation) and o.kind == node.kind:
            items = o.operands
            changed = True
        else:
            items = (o,)
        for it in items:
            if it == absorbing:
                return absorbing
            if it == neutral or it in seen:
                changed = True
                continue
            seen.add(it)
            flat.append(it)
    for it in flat:
        if isinstance(it, E.Operation) and it.kind == E.NOT and it.operands[0] in seen:
            return absorbing
    if not flat:
        return neutral
    if len(flat) == 1:
        return flat[0]
    if changed:
        return E.Operation(node.kind, tuple(flat), (), E.BOOL)
    return None


def _ite(node, ops):
    c, a, b = ops
    if _is_c(c):
        return a if c.value else b
    if a == b:
        return a
    if isinstance(c, E.Operation) and c.kind == E.NOT:
        return _op(E.ITE, c.operands[0], b, a)
    if node.sort.is_bool:
        if _is_c(a, True) and _is_c(b, False):
            return c
        if _is_c(a, False) and _is_c(b, True):
            return _op(E.NOT, c)
    return None


# -- structure ------------------------------------------------------------------

def _concat(node, ops):
    flat = []
    for o in ops:
        if isinstance(o, E.Operation) and o.kind == E.CONCAT:
            flat.extend(o.operands)
        else:
            flat.append(o)
    merged = []
    for o in flat:
        if merged:
            prev = merged[-1]
            if _is_c(prev) and _is_c(o):
                w = prev.sort.width + o.sort.width
                merged[-1] = _c((prev.value << o.sort.width) | o.value, E.BitVecSort(w))
                continue
            if (
                isinstance(prev, E.Operation)
                and isinstance(o, E.Operation)
                and prev.kind == E.EXTRACT
                and o.kind == E.EXTRACT
                and prev.operands[0] == o.operands[0]
                and prev.params[1] == o.params[0] + 1
            ):
                merged[-1] = _op(E.EXTRACT, o.operands[0], params=(prev.params[0], o.params[1]))
                continue
        merged.append(o)
    if len(merged) == 1:
        return merged[0]
    if len(merged) != len(ops) or any(m is not o for m, o in zip(merged, ops)):
        return E.Operation(E.CONCAT, tuple(merged), (), node.sort)
    return None


def _extract(node, ops):
    (x,) = ops
    hi, lo = node.params
    w = x.sort.width
    if lo == 0 and hi == w - 1:
        return x
    if not isinstance(x, E.Operation):
        return None
    if x.kind == E.EXTRACT:
        base_lo = x.params[1]
        return _op(E.EXTRACT, x.operands[0], params=(hi + base_lo, lo + base_lo))
    if x.kind == E.CONCAT:
        pieces = []
        top = w
        for part in x.operands:
            p_hi, p_lo = top - 1, top - part.sort.width
            top = p_lo
            if p_lo > hi or p_hi < lo:
                continue
            pieces.append(_op(E.EXTRACT, part, params=(min(hi, p_hi) - p_lo, max(lo, p_lo) - p_lo)))
        return E.concat(*pieces)
    if x.kind == E.ZEXT:
        inner = x.operands[0]
        iw = inner.sort.width
        if hi < iw:
            return _op(E.EXTRACT, inner, params=(hi, lo))
        if lo >= iw:
            return _c(0, node.sort)
        return _op(E.ZEXT, _op(E.EXTRACT, inner, params=(iw - 1, lo)), params=(hi - iw + 1,))
    if x.kind in (E.BVAND, E.BVOR, E.BVXOR) and _is_c(x.operands[1]):
        k = x.operands[1]
        return _op(
            x.kind,
            _op(E.EXTRACT, x.operands[0], params=(hi, lo)),
            _c((k.value >> lo) & _ones(hi - lo + 1), node.sort),
        )
    if x.kind == E.ITE and _is_c(x.operands[1]) and _is_c(x.operands[2]):
        c, a, b = x.operands
        return _op(E.ITE, c, _op(E.EXTRACT, a, params=(hi, lo)), _op(E.EXTRACT, b, params=(hi, lo)))
    return None


def _extend(node, ops):
    (x,) = ops
    (k,) = node.params
    if k == 0:
        return x
    if node.kind == E.ZEXT and isinstance(x, E.Operation) and x.kind == E.ZEXT:
        return _op(E.ZEXT, x.operands[0], params=(k + x.params[0],))
    if node.kind == E.ZEXT:
        return E.concat(_c(0, E.BitVecSort(k)), x)
    return None


def _select(node, ops):
    array, index = ops
    while True:
        if isinstance(array, E.Constant):
            return _c(array.value, node.sort)
        if not isinstance(array, E.Operation):
            break
        if array.kind == E.STORE:
            base, j, v = array.operands
            if j == index:
                return v
            if _is_c(j) and _is_c(index):
                array = base
                continue
            break
        if array.kind == E.ITE:
            c, a, b = array.operands
            return _op(E.ITE, c, _op(E.SELECT, a, index), _op(E.SELECT, b, index))
        break
    if array is ops[0]:
        return None
    return E.Operation(E.SELECT, (array, index), (), node.sort)


def _store(node, ops):
    array, index, value = ops
    if isinstance(array, E.Operation) and array.kind == E.STORE and array.operands[1] == index:
        return _op(E.STORE, array.operands[0], index, value)
    if isinstance(value, E.Operation) and value.kind == E.SELECT:
        if value.operands[0] == array and value.operands[1] == index:
            return array
    if isinstance(array, E.Constant) and _is_c(value, array.value):
        return array
    return None


_RULES = {
    E.BVADD: _bvadd,
    E.BVSUB: _bvsub,
    E.BVMUL: _bvmul,
    E.BVAND: _bvand,
    E.BVOR: _bvor,
    E.BVXOR: _bvxor,
    E.BVSHL: _shift,
    E.BVLSHR: _shift,
    E.BVASHR: _shift,
    E.BVUDIV: _bvudiv,
    E.BVUREM: _bvurem,
    E.BVNOT: _double_neg,
    E.BVNEG: _double_neg,
    E.BVULT: _compare,
    E.BVULE: _compare,
    E.BVSLT: _compare,
    E.BVSLE: _compare,
    E.EQ: _eq,
    E.NOT: _not,
    E.AND: _andor,
    E.OR: _andor,
    E.ITE: _ite,
    E.CONCAT: _concat,
    E.EXTRACT: _extract,
    E.ZEXT: _extend,
    E.SEXT: _extend,
    E.SELECT: _select,
    E.STORE: _store,
}


def simplify(expr: E.Expression) -> E.Expression:
    """Return an equivalent, usually smaller, term."""
    memo: dict = {}
    stack = [expr]
    while stack:
        node = stack[-1]
        if id(node) in memo:
            stack.pop()
            continue
        if not isinstance(node, E.Operation):
            memo[id(node)] = node
            stack.pop()
            continue
        pending = [op for op in node.operands if id(op) not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        new_ops = tuple(memo[id(op)] for op in node.operands)
        if all(n is o for n, o in zip(new_ops, node.operands)):
            rebuilt = node
        else:
            rebuilt = E.raw_operation(node.kind, new_ops, node.params)
        memo[id(node)] = rewrite(rebuilt)
    return memo[id(expr)]
