from __future__ import annotations

import enum
from typing import Any, Iterable, List, Optional, Tuple

from mcore.core.events import AbandonState, Concretize, TerminationReason
from mcore.smt import expression as E
from mcore.smt.constraints import ConstraintSet
from mcore.smt.solver import default_solver


class Status(enum.Enum):
    READY = "ready"
    BUSY = "busy"
    FORKED = "forked"  # retired in favour of its children
    TERMINATED = "terminated"


class Context:
    """Base for backend machine state.

    ``pending`` holds values chosen by a concretization while the
    interrupted instruction is retried; it is cleared once the
    instruction completes.
    """

    def __init__(self):
        self.pending: dict = {}

    def concretize(self, expr, policy=None, message: str = ""):
        """Concrete value of ``expr``, raising :class:`Concretize` if it is symbolic."""
        if isinstance(expr, E.Constant):
            return expr.value
        if expr in self.pending:
            return self.pending[expr]
        raise Concretize(expr, policy, message=message)

    def clone(self):
        raise NotImplementedError


class State:
    """One explorable program state.

    ``context`` is owned by the backend (registers and memory for the
    register machine, call frames and world for the EVM).  Everything a
    hook needs is reachable from here: the path constraints, solver
    queries over them, fresh symbolic inputs, and :meth:`abandon`.
    """

    def __init__(self, context: Any, constraints: Optional[ConstraintSet] = None, platform: str = ""):
        self.id: Optional[int] = None
        self.parent_id: Optional[int] = None
        self.status = Status.READY
        self.constraints = constraints if constraints is not None else ConstraintSet()
        self.context = context
        self.platform = platform
        self.input_registry: List[Tuple[E.Variable, object]] = []
        self.trace: list = []
        self.child_counter = 0
        self.depth = 0
        self.termination: Optional[TerminationReason] = None
        self.messages: List[str] = []
        self.retrying = False
        self._bus = None

    # -- plumbing --------------------------------------------------------------
    def __getstate__(self):
        d = self.__dict__.copy()
        d["_bus"] = None
        return d

    def publish(self, kind: str, *args) -> None:
        if self._bus is not None:
            self._bus.publish(kind, self, *args)

    def clone(self) -> "State":
        child = State.__new__(State)
        child.__dict__.update(self.__dict__)
        child.context = self.context.clone()
        child.input_registry = list(self.input_registry)
        child.trace = list(self.trace)
        child.messages = list(self.messages)
        child.child_counter = 0
        child.depth = self.depth + 1
        child.parent_id = self.id
        child.id = None
        child.status = Status.READY
        child.termination = None
        return child

    @property
    def cpu(self):
        """Alias used by native hooks (``state.cpu.R3``)."""
        return self.context

    # -- solver queries ----------------------------------------------------------
    @staticmethod
    def _as_bool(cond) -> E.Expression:
        if isinstance(cond, bool):
            return E.BoolConstant(cond)
        if not isinstance(cond, E.Expression) or not cond.sort.is_bool:
            raise TypeError(f"expected a Bool expression, got {cond!r}")
        return cond

    def can_be_true(self, cond) -> bool:
        return default_solver().can_be_true(self.constraints, self._as_bool(cond))

    def must_be_true(self, cond) -> bool:
        return default_solver().must_be_true(self.constraints, self._as_bool(cond))

    def is_feasible(self) -> bool:
        return default_solver().is_sat(self.constraints)

    def solve_one(self, expr):
        if isinstance(expr, int):
            return expr
        return default_solver().get_value(self.constraints, expr)

    def solve_n(self, expr, n: int) -> list:
        return default_solver().all_values(self.constraints, expr, n)

    def solve_minmax(self, expr) -> tuple:
        return default_solver().min_max(self.constraints, expr)

    def solve_buffer(self, exprs: Iterable[E.Expression]) -> bytes:
        return bytes(default_solver().get_values(self.constraints, list(exprs)))

    # -- mutation ----------------------------------------------------------------
    def constrain(self, cond) -> None:
        """Append a constraint.  Feasibility is checked lazily (next fork or save)."""
        cond = self._as_bool(cond)
        for v in cond.variables:
            if v.name not in self.constraints.declarations:
                raise E.ExpressionError(f"constraint mentions undeclared variable {v.name}")
        self.constraints = self.constraints.add(cond)

    def abandon(self) -> None:
        """Drop this state: it terminates as Abandoned and yields no test case."""
        raise AbandonState()

    def register_input(self, var: E.Variable, tag) -> None:
        self.constraints = self.constraints.declare(var)
        self.input_registry.append((var, tag))

    def new_symbolic_value(self, width: int, name: str, tag=None) -> E.Variable:
        var = E.BitVec(name, width)
        if var.name in self.constraints.declarations:
            raise E.ExpressionError(f"symbol {name} already exists in this state")
        self.register_input(var, tag if tag is not None else name)
        return var

    def new_symbolic_buffer(self, size: int, label: str = "buffer") -> list:
        """``size`` fresh symbolic bytes named ``<label>_<k>_<i>``."""
        k = sum(1 for _, tag in self.input_registry if isinstance(tag, tuple) and tag[0] == label and tag[2] == 0)
        return [self.new_symbolic_value(8, f"{label}_{k}_{i}", (label, k, i)) for i in range(size)]

    def __repr__(self):
        return f"<State {self.id} {self.status.value}{' ' + str(self.termination) if self.termination else ''}>"
