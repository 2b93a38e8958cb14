"""Typed symbolic terms.

Three node kinds exist: :class:`Constant`, :class:`Variable` and
:class:`Operation`.  Nodes are immutable; equality is structural and the
hash is cached, so large shared trees compare cheaply.

Operations are normally built through :func:`make_operation`, which checks
operand sorts and applies the local rewrite rules from
:mod:`mcore.smt.simplify`.  Python operators on bit-vector expressions map
to the corresponding ``BV*`` operations; ``==`` stays structural, use
:meth:`Expression.eq` to build an equality term.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

# STORE chains for memories and storage nest deeply.
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)


class ExpressionError(ValueError):
    """Raised when a term is built with bad sorts or out-of-range values."""


@dataclass(frozen=True)
class Sort:
    kind: str  # "bool" | "bv" | "array"
    width: int = 0
    index_width: int = 0
    value_width: int = 0

    def __post_init__(self):
        if self.kind == "bv" and self.width < 1:
            raise ExpressionError(f"bit-vector width must be >= 1, got {self.width}")
        if self.kind == "array" and (self.index_width < 1 or self.value_width < 1):
            raise ExpressionError("array sorts need positive index and value widths")

    @property
    def is_bool(self) -> bool:
        return self.kind == "bool"

    @property
    def is_bv(self) -> bool:
        return self.kind == "bv"

    @property
    def is_array(self) -> bool:
        return self.kind == "array"

    def __str__(self):
        if self.kind == "bool":
            return "Bool"
        if self.kind == "bv":
            return f"BitVec({self.width})"
        return f"Array({self.index_width}->{self.value_width})"


BOOL = Sort("bool")
_BV_SORTS: dict = {}


def BitVecSort(width: int) -> Sort:
    try:
        return _BV_SORTS[width]
    except KeyError:
        s = _BV_SORTS[width] = Sort("bv", width)
        return s


def ArraySort(index_width: int, value_width: int) -> Sort:
    return Sort("array", 0, index_width, value_width)


# Operation kinds.
BVADD = "bvadd"
BVSUB = "bvsub"
BVMUL = "bvmul"
BVUDIV = "bvudiv"
BVSDIV = "bvsdiv"
BVUREM = "bvurem"
BVSREM = "bvsrem"
BVAND = "bvand"
BVOR = "bvor"
BVXOR = "bvxor"
BVNOT = "bvnot"
BVNEG = "bvneg"
BVSHL = "bvshl"
BVLSHR = "bvlshr"
BVASHR = "bvashr"
BVULT = "bvult"
BVULE = "bvule"
BVSLT = "bvslt"
BVSLE = "bvsle"
EQ = "="
NOT = "not"
AND = "and"
OR = "or"
ITE = "ite"
CONCAT = "concat"
EXTRACT = "extract"
ZEXT = "zero_extend"
SEXT = "sign_extend"
SELECT = "select"
STORE = "store"

BV_BINARY = frozenset(
    {BVADD, BVSUB, BVMUL, BVUDIV, BVSDIV, BVUREM, BVSREM, BVAND, BVOR, BVXOR, BVSHL, BVLSHR, BVASHR}
)
BV_UNARY = frozenset({BVNOT, BVNEG})
BV_COMPARE = frozenset({BVULT, BVULE, BVSLT, BVSLE})
KINDS = BV_BINARY | BV_UNARY | BV_COMPARE | frozenset(
    {EQ, NOT, AND, OR, ITE, CONCAT, EXTRACT, ZEXT, SEXT, SELECT, STORE}
)
COMMUTATIVE = frozenset({BVADD, BVMUL, BVAND, BVOR, BVXOR, EQ, AND, OR})


class Expression:
    __slots__ = ("sort", "_hash", "_vars", "__weakref__")

    sort: Sort

    # -- structural identity ------------------------------------------------
    def __hash__(self):
        return self._hash

    def __ne__(self, other):
        return not self == other

    def __bool__(self):
        raise TypeError(
            "symbolic expressions have no truth value; "
            "use is_true()/is_false() or ask the solver"
        )

    @property
    def width(self) -> int:
        return self.sort.width

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def variables(self) -> frozenset:
        """All :class:`Variable` nodes reachable from this term."""
        if self._vars is None:
            _collect_variables(self)
        return self._vars

    # -- operator sugar -----------------------------------------------------
    def _coerce(self, other) -> "Expression":
        if isinstance(other, Expression):
            return other
        if isinstance(other, bool) and self.sort.is_bool:
            return BoolConstant(other)
        if isinstance(other, int) and self.sort.is_bv:
            return Constant(other % (1 << self.sort.width), self.sort)
        raise TypeError(f"cannot combine {self.sort} with {other!r}")

    def _bin(self, kind, other, swap=False):
        other = self._coerce(other)
        args = (other, self) if swap else (self, other)
        return make_operation(kind, args)

    def __add__(self, o):
        return self._bin(BVADD, o)

    def __radd__(self, o):
        return self._bin(BVADD, o, True)

    def __sub__(self, o):
        return self._bin(BVSUB, o)

    def __rsub__(self, o):
        return self._bin(BVSUB, o, True)

    def __mul__(self, o):
        return self._bin(BVMUL, o)

    def __rmul__(self, o):
        return self._bin(BVMUL, o, True)

    def __and__(self, o):
        return self._bin(AND if self.sort.is_bool else BVAND, o)

    def __rand__(self, o):
        return self._bin(AND if self.sort.is_bool else BVAND, o, True)

    def __or__(self, o):
        return self._bin(OR if self.sort.is_bool else BVOR, o)

    def __ror__(self, o):
        return self._bin(OR if self.sort.is_bool else BVOR, o, True)

    def __xor__(self, o):
        return self._bin(BVXOR, o)

    def __rxor__(self, o):
        return self._bin(BVXOR, o, True)

    def __lshift__(self, o):
        return self._bin(BVSHL, o)

    def __rshift__(self, o):
        return self._bin(BVLSHR, o)

    def __invert__(self):
        return make_operation(NOT if self.sort.is_bool else BVNOT, (self,))

    def __neg__(self):
        return make_operation(BVNEG, (self,))

    def eq(self, o):
        return self._bin(EQ, o)

    def ne(self, o):
        return make_operation(NOT, (self.eq(o),))

    def ult(self, o):
        return self._bin(BVULT, o)

    def ule(self, o):
        return self._bin(BVULE, o)

    def ugt(self, o):
        return self._bin(BVULT, o, True)

    def uge(self, o):
        return self._bin(BVULE, o, True)

    def slt(self, o):
        return self._bin(BVSLT, o)

    def sle(self, o):
        return self._bin(BVSLE, o)

    def sgt(self, o):
        return self._bin(BVSLT, o, True)

    def sge(self, o):
        return self._bin(BVSLE, o, True)

    def udiv(self, o):
        return self._bin(BVUDIV, o)

    def urem(self, o):
        return self._bin(BVUREM, o)

    def sdiv(self, o):
        return self._bin(BVSDIV, o)

    def srem(self, o):
        return self._bin(BVSREM, o)

    def ashr(self, o):
        return self._bin(BVASHR, o)

    def extract(self, hi: int, lo: int):
        return make_operation(EXTRACT, (self,), (hi, lo))

    def zext(self, n: int):
        return make_operation(ZEXT, (self,), (n,))

    def sext(self, n: int):
        return make_operation(SEXT, (self,), (n,))

    def concat(self, *others):
        return make_operation(CONCAT, (self, *others))


class Constant(Expression):
    """A literal.  For array sorts ``value`` is the default element."""

    __slots__ = ("value",)

    def __init__(self, value, sort: Sort):
        if sort.is_bool:
            if not isinstance(value, bool):
                raise ExpressionError(f"Bool constant needs a bool, got {value!r}")
        else:
            limit = 1 << (sort.width if sort.is_bv else sort.value_width)
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < limit:
                raise ExpressionError(f"constant {value!r} does not fit {sort}")
        self.sort = sort
        self.value = value
        self._hash = hash(("c", value, sort))
        self._vars = frozenset()

    def __eq__(self, other):
        return self is other or (
            isinstance(other, Constant) and self.value == other.value and self.sort == other.sort
        )

    __hash__ = Expression.__hash__

    def __reduce__(self):
        return (Constant, (self.value, self.sort))

    @property
    def is_constant(self) -> bool:
        return True

    def __repr__(self):
        if self.sort.is_bool:
            return f"{self.value}"
        if self.sort.is_array:
            return f"K({self.value:#x})"
        return f"{self.value:#x}:{self.sort.width}"


class Variable(Expression):
    __slots__ = ("name",)

    def __init__(self, name: str, sort: Sort):
        if not name:
            raise ExpressionError("variables need a name")
        self.sort = sort
        self.name = name
        self._hash = hash(("v", name, sort))
        self._vars = None

    def __eq__(self, other):
        return self is other or (
            isinstance(other, Variable) and self.name == other.name and self.sort == other.sort
        )

    __hash__ = Expression.__hash__

    def __reduce__(self):
        return (Variable, (self.name, self.sort))

    @property
    def variables(self):
        if self._vars is None:
            self._vars = frozenset((self,))
        return self._vars

    def __repr__(self):
        return self.name


class Operation(Expression):
    __slots__ = ("kind", "operands", "params")

    def __init__(self, kind: str, operands: tuple, params: tuple, sort: Sort):
        self.kind = kind
        self.operands = operands
        self.params = params
        self.sort = sort
        self._hash = hash((kind, params, operands))
        self._vars = None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Operation) or self._hash != other._hash:
            return False
        return (
            self.kind == other.kind
            and self.params == other.params
            and self.operands == other.operands
        )

    __hash__ = Expression.__hash__

    def __reduce__(self):
        return (Operation, (self.kind, self.operands, self.params, self.sort))

    def __repr__(self):
        head = self.kind if not self.params else f"{self.kind}{list(self.params)}"
        return f"({head} {' '.join(map(repr, self.operands))})"


def _collect_variables(root: Expression) -> None:
    # Iterative post-order so deep STORE chains do not hit the recursion limit.
    stack = [root]
    while stack:
        node = stack[-1]
        if node._vars is not None:
            stack.pop()
            continue
        if isinstance(node, Variable):
            node.variables
            stack.pop()
            continue
        pending = [op for op in node.operands if op._vars is None]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        acc = frozenset()
        for op in node.operands:
            if op._vars:
                acc = acc | op._vars
        node._vars = acc


TRUE = Constant(True, BOOL)
FALSE = Constant(False, BOOL)


def BoolConstant(value: bool) -> Constant:
    return TRUE if value else FALSE


def make_constant(value: int, width: int) -> Constant:
    """Bit-vector literal; ``value`` must satisfy ``0 <= value < 2**width``."""
    return Constant(value, BitVecSort(width))


def BitVec(name: str, width: int) -> Variable:
    return Variable(name, BitVecSort(width))


def Bool(name: str) -> Variable:
    return Variable(name, BOOL)


def Array(name: str, index_width: int, value_width: int) -> Variable:
    return Variable(name, ArraySort(index_width, value_width))


def ConstArray(index_width: int, value_width: int, default: int = 0) -> Constant:
    return Constant(default, ArraySort(index_width, value_width))


def _result_sort(kind: str, ops: Sequence[Expression], params: tuple) -> Sort:
    n = len(ops)
    sorts = [o.sort for o in ops]

    def need(cond, msg):
        if not cond:
            raise ExpressionError(f"{kind}: {msg} (got {', '.join(map(str, sorts))})")

    if kind in BV_BINARY or kind in BV_COMPARE:
        need(n == 2, "takes two operands")
        need(sorts[0].is_bv and sorts[0] == sorts[1], "operands must be equal-width bit-vectors")
        return BOOL if kind in BV_COMPARE else sorts[0]
    if kind in BV_UNARY:
        need(n == 1 and sorts[0].is_bv, "takes one bit-vector")
        return sorts[0]
    if kind == EQ:
        need(n == 2 and sorts[0] == sorts[1], "operands must share a sort")
        return BOOL
    if kind == NOT:
        need(n == 1 and sorts[0].is_bool, "takes one Bool")
        return BOOL
    if kind in (AND, OR):
        need(n >= 1 and all(s.is_bool for s in sorts), "takes Bool operands")
        return BOOL
    if kind == ITE:
        need(n == 3 and sorts[0].is_bool and sorts[1] == sorts[2], "needs Bool, x, x")
        return sorts[1]
    if kind == CONCAT:
        need(n >= 1 and all(s.is_bv for s in sorts), "takes bit-vectors")
        return BitVecSort(sum(s.width for s in sorts))
    if kind == EXTRACT:
        need(n == 1 and sorts[0].is_bv, "takes one bit-vector")
        hi, lo = params
        need(0 <= lo <= hi < sorts[0].width, f"bad range [{hi}:{lo}]")
        return BitVecSort(hi - lo + 1)
    if kind in (ZEXT, SEXT):
        need(n == 1 and sorts[0].is_bv, "takes one bit-vector")
        (k,) = params
        need(k >= 0, "extension must be non-negative")
        return BitVecSort(sorts[0].width + k)
    if kind == SELECT:
        need(n == 2 and sorts[0].is_array, "needs an array and an index")
        need(sorts[1].is_bv and sorts[1].width == sorts[0].index_width, "index width mismatch")
        return BitVecSort(sorts[0].value_width)
    if kind == STORE:
        need(n == 3 and sorts[0].is_array, "needs array, index, value")
        need(sorts[1].is_bv and sorts[1].width == sorts[0].index_width, "index width mismatch")
        need(sorts[2].is_bv and sorts[2].width == sorts[0].value_width, "value width mismatch")
        return sorts[0]
    raise ExpressionError(f"unknown operation kind {kind!r}")


def raw_operation(kind: str, operands: Iterable[Expression], params: tuple = ()) -> Operation:
    """Sort-checked operation node with no rewriting."""
    ops = tuple(operands)
    for o in ops:
        if not isinstance(o, Expression):
            raise ExpressionError(f"{kind}: operand {o!r} is not an Expression")
    sort = _result_sort(kind, ops, tuple(params))
    return Operation(kind, ops, tuple(params), sort)


def make_operation(
    kind: str, operands: Iterable[Expression], params: tuple = (), fold: bool = True
) -> Expression:
    ops = tuple(operands)
    node = raw_operation(kind, ops, params)
    if not fold:
        return node
    return _simplify.rewrite(node)


# -- small builders used throughout the backends ----------------------------

def bv(value: int, width: int) -> Constant:
    return Constant(value % (1 << width), BitVecSort(width))


def ite(cond: Expression, a: Expression, b: Expression) -> Expression:
    return make_operation(ITE, (cond, a, b))


def and_(*conds: Expression) -> Expression:
    if not conds:
        return TRUE
    return make_operation(AND, conds)


def or_(*conds: Expression) -> Expression:
    if not conds:
        return FALSE
    return make_operation(OR, conds)


def not_(cond: Expression) -> Expression:
    return make_operation(NOT, (cond,))


def concat(*parts: Expression) -> Expression:
    return make_operation(CONCAT, parts)


def select(array: Expression, index: Expression) -> Expression:
    return make_operation(SELECT, (array, index))


def store(array: Expression, index: Expression, value: Expression) -> Expression:
    return make_operation(STORE, (array, index, value))


def bool_to_bv(cond: Expression, width: int) -> Expression:
    return ite(cond, bv(1, width), bv(0, width))


def is_true(e: Expression) -> bool:
    return isinstance(e, Constant) and e.value is True


def is_false(e: Expression) -> bool:
    return isinstance(e, Constant) and e.value is False


def as_int(e: Union[Expression, int]) -> Optional[int]:
    """Concrete value of a constant (bools as 0/1), or None if symbolic."""
    if isinstance(e, int):
        return int(e)
    if isinstance(e, Constant) and not e.sort.is_array:
        return int(e.value)
    return None


from mcore.smt import simplify as _simplify  # noqa: E402  (rewrite rules need the node classes)
