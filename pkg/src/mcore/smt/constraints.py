from __future__ import annotations

from typing import Iterable, Optional

from mcore.smt import expression as E


class ConstraintSet:
    """Immutable path predicate: declared variables plus ordered assertions.

    :meth:`add` and :meth:`declare` return a child set whose ``parent`` is
    this one; the child always contains every parent assertion.
    """

    __slots__ = ("assertions", "declarations", "parent")

    def __init__(
        self,
        assertions: Iterable[E.Expression] = (),
        declarations: Optional[dict] = None,
        parent: Optional["ConstraintSet"] = None,
    ):
        self.assertions: tuple = tuple(assertions)
        decls = dict(declarations or {})
        for a in self.assertions:
            if not a.sort.is_bool:
                raise E.ExpressionError(f"assertions must be Bool, got {a.sort}")
            for v in a.variables:
                _declare_into(decls, v)
        self.declarations: dict = decls
        self.parent = parent

    def add(self, *conds: E.Expression) -> "ConstraintSet":
        new = [c for c in conds if not E.is_true(c)]
        if not new:
            return self
        decls = self.declarations
        for c in new:
            if not isinstance(c, E.Expression) or not c.sort.is_bool:
                raise E.ExpressionError(f"constraints must be Bool expressions, got {c!r}")
            for v in c.variables:
                if v.name not in decls:
                    if decls is self.declarations:
                        decls = dict(decls)
                    _declare_into(decls, v)
                elif decls[v.name].sort != v.sort:
                    raise E.ExpressionError(f"{v.name} redeclared with sort {v.sort}")
        child = ConstraintSet.__new__(ConstraintSet)
        child.assertions = self.assertions + tuple(new)
        child.declarations = decls
        child.parent = self
        return child

    def declare(self, *variables: E.Variable) -> "ConstraintSet":
        decls = dict(self.declarations)
        for v in variables:
            _declare_into(decls, v)
        child = ConstraintSet.__new__(ConstraintSet)
        child.assertions = self.assertions
        child.declarations = decls
        child.parent = self
        return child

    @property
    def variables(self) -> list:
        return [self.declarations[n] for n in sorted(self.declarations)]

    def extends(self, other: "ConstraintSet") -> bool:
        """True if every assertion of ``other`` is a prefix of ours."""
        n = len(other.assertions)
        return self.assertions[:n] == other.assertions

    def __iter__(self):
        return iter(self.assertions)

    def __len__(self):
        return len(self.assertions)

    def __reduce__(self):
        # the parent chain is lineage bookkeeping and is not serialized
        return (ConstraintSet, (self.assertions, self.declarations))

    def to_smtlib(self, extra=None, logic="QF_AUFBV") -> str:
        from mcore.smt.smtlib import to_smtlib

        return to_smtlib(self, extra, logic)

    def __repr__(self):
        return f"<ConstraintSet {len(self.assertions)} assertions, {len(self.declarations)} vars>"


def _declare_into(decls: dict, var: E.Variable) -> None:
    prev = decls.get(var.name)
    if prev is None:
        decls[var.name] = var
    elif prev.sort != var.sort:
        raise E.ExpressionError(f"{var.name} redeclared with sort {var.sort} (was {prev.sort})")
