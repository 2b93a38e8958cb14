"""Life-cycle signals raised by backends, concretization policies and the
callback registries (location hooks and the event bus)."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Optional

from mcore.smt.expression import Expression

logger = logging.getLogger(__name__)


# -- termination reasons -------------------------------------------------------

EXIT = "Exit"
MEMORY_VIOLATION = "MemoryViolation"
INVALID_INSTRUCTION = "InvalidInstruction"
REVERT = "Revert"
OUT_OF_GAS = "OutOfGas"
ABANDONED = "Abandoned"
SOLVER_UNKNOWN = "SolverUnknown"
CALLBACK_ERROR = "CallbackError"


@dataclass(frozen=True)
class TerminationReason:
    kind: str
    detail: object = None

    def __str__(self):
        if self.detail is None:
            return self.kind
        if isinstance(self.detail, int):
            return f"{self.kind}({self.detail:#x})" if self.kind == MEMORY_VIOLATION else f"{self.kind}({self.detail})"
        return f"{self.kind}({self.detail})"

    @classmethod
    def parse(cls, text: str) -> "TerminationReason":
        text = text.strip()
        if "(" not in text:
            return cls(text)
        kind, _, rest = text.partition("(")
        detail = rest[:-1]
        try:
            value = int(detail, 0)
        except ValueError:
            return cls(kind, detail)
        return cls(kind, value)


def Exit(code: int = 0) -> TerminationReason:
    return TerminationReason(EXIT, code)


# -- policies -----------------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """How many values a concretization produces: ALL (up to cap), ONE, MINMAX."""

    kind: str = "ALL"
    cap: int = 64

    def __post_init__(self):
        if self.kind not in ("ALL", "ONE", "MINMAX"):
            raise ValueError(f"unknown policy {self.kind!r}")
        if self.cap < 1:
            raise ValueError("policy cap must be >= 1")


ALL = Policy("ALL")
ONE = Policy("ONE", 1)
MINMAX = Policy("MINMAX", 2)


# -- signals ----------------------------------------------------------------------------

class ExecutionEvent(Exception):
    """Raised out of a backend instruction to interrupt into the engine."""


class Concretize(ExecutionEvent):
    """Replace ``expression`` by feasible concrete values, one child each.

    ``setter(child, value)`` installs the value into the child's context;
    the interrupted instruction is then executed again in every child.
    ``restrict`` is an optional Bool appended to every child before
    values are enumerated.
    """

    def __init__(
        self,
        expression: Expression,
        policy: Optional[Policy] = None,
        setter: Optional[Callable] = None,
        restrict: Optional[Expression] = None,
        message: str = "",
    ):
        super().__init__(message or f"concretize {expression!r}")
        self.expression = expression
        self.policy = policy
        self.setter = setter
        self.restrict = restrict
        self.message = message


class Terminate(ExecutionEvent):
    def __init__(self, reason: TerminationReason, message: str = ""):
        super().__init__(message or str(reason))
        self.reason = reason
        self.message = message


class Park(ExecutionEvent):
    """The state finished a unit of work (an EVM transaction) and waits
    for more input; it stays alive and is handed back to the caller."""


class AbandonState(Exception):
    """Raised by :meth:`State.abandon` to drop the current state."""


class CallbackError(Exception):
    def __init__(self, callback, exc):
        super().__init__(f"{getattr(callback, '__name__', callback)!s} raised {exc!r}")
        self.callback = callback
        self.original = exc


# -- callback registries ------------------------------------------------------------------

EVENT_KINDS = (
    "will_execute_instruction",
    "did_execute_instruction",
    "memory_read",
    "memory_write",
    "state_forked",
    "state_terminated",
    "symbolic_transaction_applied",
)


class EventBus:
    """Ordered subscribers per event kind."""

    def __init__(self):
        self.subscribers: dict = defaultdict(list)

    def subscribe(self, kind: str, callback: Callable) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}; expected one of {EVENT_KINDS}")
        self.subscribers[kind].append(callback)

    def publish(self, kind: str, *args) -> None:
        for cb in self.subscribers.get(kind, ()):
            try:
                cb(*args)
            except (AbandonState, ExecutionEvent):
                raise
            except Exception as exc:
                raise CallbackError(cb, exc) from exc

    def has(self, kind: str) -> bool:
        return bool(self.subscribers.get(kind))


class HookRegistry:
    """Callbacks keyed by program location; ``None`` matches every location."""

    def __init__(self):
        self.hooks: dict = defaultdict(list)

    def add(self, location, callback: Callable) -> None:
        self.hooks[location].append(callback)

    def fire(self, location, state) -> None:
        for key in (location, None):
            for cb in self.hooks.get(key, ()):
                try:
                    cb(state)
                except (AbandonState, ExecutionEvent):
                    raise
                except Exception as exc:
                    raise CallbackError(cb, exc) from exc

    def __bool__(self):
        return any(self.hooks.values())
