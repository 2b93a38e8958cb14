"""State exploration loop shared by every backend.

A backend ("platform") supplies four things:

* ``name``: tag stored in serialized states
* ``location(state)``: the program location about to execute
* ``execute(state)``: run one instruction, raising :class:`Concretize`,
  :class:`Terminate` or :class:`Park` to interrupt
* ``testcase_files(state, model)`` and ``format_trace(trace)`` for the
  workspace

Concretization is retry based: the backend raises ``Concretize`` before
mutating anything, the engine forks one child per value, installs the
value as a pending answer in each child and the interrupted instruction
runs again from scratch.  Hooks and ``will_execute_instruction`` fire only
on the first attempt.
"""

from __future__ import annotations

import collections
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional

from mcore.core import events as ev
from mcore.core.events import (
    AbandonState,
    CallbackError,
    Concretize,
    EventBus,
    HookRegistry,
    Park,
    Policy,
    Terminate,
    TerminationReason,
)
from mcore.core.state import State, Status
from mcore.core.workspace import Workspace
from mcore.smt import expression as E
from mcore.smt.smtlib import values_block
from mcore.smt.solver import (
    NoModel,
    SolverConfig,
    SolverUnknown,
    constant_like,
    default_solver,
    set_default_config,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("fifo", "lifo", "random")


class EngineError(RuntimeError):
    """The backend raised something that is not an execution event."""


@dataclass
class EngineConfig:
    workers: int = 1
    strategy: str = "fifo"
    seed: Optional[int] = None
    policy: Policy = ev.ALL
    max_states: Optional[int] = None
    max_instructions: Optional[int] = None
    timeout: Optional[float] = None
    solver: Optional[SolverConfig] = None
    # keep terminated State objects in the report (workers ship them back)
    keep_states: bool = True

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown selection strategy {self.strategy!r}")
        if self.timeout is not None and self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class Outcome:
    state_id: int
    reason: str
    trace: tuple
    testcase: Optional[int] = None

    @property
    def abandoned(self) -> bool:
        return self.reason == ev.ABANDONED


@dataclass
class ExplorationReport:
    outcomes: List[Outcome] = field(default_factory=list)
    forks: int = 0
    concretizations: int = 0
    states_created: int = 0
    instructions: int = 0
    wall_time: float = 0.0
    timed_out: bool = False
    limit_reached: bool = False
    ready: List[State] = field(default_factory=list)
    parked: List[State] = field(default_factory=list)
    terminated_states: List[State] = field(default_factory=list)

    @property
    def terminated(self) -> int:
        """Terminated states that were not abandoned (one test case each)."""
        return sum(1 for o in self.outcomes if not o.abandoned)

    @property
    def abandoned(self) -> int:
        return sum(1 for o in self.outcomes if o.abandoned)

    @property
    def testcases(self) -> int:
        return sum(1 for o in self.outcomes if o.testcase is not None)

    @property
    def reasons(self) -> collections.Counter:
        return collections.Counter(o.reason for o in self.outcomes)

    def traces(self, include_abandoned: bool = False) -> set:
        return {o.trace for o in self.outcomes if include_abandoned or not o.abandoned}

    @property
    def coverage(self) -> set:
        locs = set()
        for o in self.outcomes:
            locs.update(o.trace)
        for s in self.parked + self.ready:
            locs.update(s.trace)
        return locs


class Engine:
    def __init__(self, platform, config: Optional[EngineConfig] = None, workspace: Optional[Workspace] = None):
        self.platform = platform
        self.config = config or EngineConfig()
        self.workspace = workspace
        self.hooks = HookRegistry()
        self.bus = EventBus()
        self._rng = random.Random(self.config.seed)
        self._next_id = 0
        self._ready: collections.deque = collections.deque()
        self._report = ExplorationReport()
        self._deadline: Optional[float] = None

    # -- registration ------------------------------------------------------------
    def register_hook(self, location, callback: Callable) -> None:
        self.hooks.add(location, callback)

    def hook(self, location):
        def deco(fn):
            self.register_hook(location, fn)
            return fn

        return deco

    def subscribe(self, kind: str, callback: Callable) -> None:
        self.bus.subscribe(kind, callback)

    # -- ids and limits ------------------------------------------------------------
    def _assign_id(self, state: State) -> None:
        state.id = self._next_id
        self._next_id += 1
        self._report.states_created += 1

    def _count_instruction(self) -> None:
        self._report.instructions += 1

    def _limits_hit(self) -> bool:
        if self._deadline is not None and time.time() >= self._deadline:
            self._report.timed_out = True
            return True
        cfg = self.config
        if cfg.max_instructions is not None and self._report.instructions >= cfg.max_instructions:
            self._report.limit_reached = True
            return True
        if cfg.max_states is not None and self._report.states_created >= cfg.max_states:
            self._report.limit_reached = True
            return True
        return False

    # -- queue -------------------------------------------------------------------------
    def _push(self, state: State) -> None:
        self._ready.append(state)

    def _select(self) -> State:
        strategy = self.config.strategy
        if strategy == "fifo":
            return self._ready.popleft()
        if strategy == "lifo":
            return self._ready.pop()
        i = self._rng.randrange(len(self._ready))
        self._ready.rotate(-i)
        return self._ready.popleft()

    def _park(self, state: State) -> None:
        self._report.parked.append(state)

    # -- main loop ---------------------------------------------------------------------
    def run(self, states: Iterable[State]) -> ExplorationReport:
        """Explore from ``states`` until nothing is Ready or a limit hits."""
        if self.config.solver is not None:
            set_default_config(self.config.solver)
        self._report = ExplorationReport()
        self._deadline = None if self.config.timeout is None else time.time() + self.config.timeout
        start = time.monotonic()
        initial = []
        for s in states:
            if s.status is not Status.READY:
                raise ValueError(f"state {s.id} is {s.status.value}, expected ready")
            if s.id is None:
                self._assign_id(s)
            else:
                self._next_id = max(self._next_id, s.id + 1)
            initial.append(s)
        if self.config.workers > 1:
            from mcore.core.parallel import run_parallel

            run_parallel(self, initial)
        else:
            for s in initial:
                self._push(s)
            self._run_serial()
        self._report.wall_time = time.monotonic() - start
        return self._report

    def _run_serial(self) -> None:
        while self._ready:
            if self._limits_hit():
                break
            self.explore_state(self._select())
        self._report.ready = list(self._ready)
        self._ready.clear()

    def explore_state(self, state: State) -> None:
        """Run ``state`` until it forks, terminates, parks or a limit hits.

        Continuing with the same state after a plain step is equivalent to
        marking it Ready and immediately selecting it again.
        """
        state._bus = self.bus
        state.status = Status.BUSY
        while True:
            if self._limits_hit():
                state.status = Status.READY
                self._push(state)
                return
            try:
                self.step(state)
            except Concretize as event:
                self._fork(state, event)
                return
            except Terminate as event:
                self.terminate(state, event.reason, event.message)
                return
            except Park:
                state.status = Status.READY
                state._bus = None
                self._park(state)
                return
            except AbandonState:
                self.terminate(state, TerminationReason(ev.ABANDONED), "abandoned by callback")
                return
            except CallbackError as exc:
                self.terminate(state, TerminationReason(ev.CALLBACK_ERROR), str(exc))
                return
            except SolverUnknown as exc:
                self.terminate(state, TerminationReason(ev.SOLVER_UNKNOWN), str(exc))
                return
            except Exception as exc:
                raise EngineError(f"backend failure in state {state.id} at {self._safe_location(state)}: {exc!r}") from exc

    def _safe_location(self, state):
        try:
            return self.platform.location(state)
        except Exception:
            return "?"

    def step(self, state: State) -> None:
        """Attempt exactly one backend instruction."""
        loc = self.platform.location(state)
        if not state.retrying:
            self.hooks.fire(loc, state)
            state.publish("will_execute_instruction", loc)
        try:
            self.platform.execute(state)
        except Concretize:
            raise
        except (Terminate, Park):
            self._complete(state, loc)
            raise
        self._complete(state, loc)

    def _complete(self, state: State, loc) -> None:
        state.trace.append(loc)
        state.retrying = False
        state.context.pending.clear()
        self._count_instruction()

    # -- concretization ----------------------------------------------------------------
    def concretize_values(self, state: State, event: Concretize) -> tuple:
        """Feasible values for the event's expression and the constraint set they extend."""
        policy = event.policy or self.config.policy
        solver = default_solver()
        cs = state.constraints
        if event.restrict is not None:
            cs = cs.add(event.restrict)
        e = event.expression
        if isinstance(e, E.Constant):
            return cs, [e.value]
        if e.sort.is_bool and policy.kind != "ONE":
            values = [v for v, c in ((True, e), (False, E.not_(e))) if solver.can_be_true(cs, c)]
            return cs, values
        if policy.kind == "ONE":
            try:
                return cs, [solver.get_value(cs, e)]
            except NoModel:
                return cs, []
        if policy.kind == "MINMAX":
            try:
                lo, hi = solver.min_max(cs, e)
            except NoModel:
                return cs, []
            return cs, [lo] if lo == hi else [lo, hi]
        values = solver.all_values(cs, e, policy.cap + 1)
        if len(values) > policy.cap:
            values = values[: policy.cap]
            state.messages.append(f"warning: concretization truncated to {policy.cap} values: {event}")
        return cs, values

    def _fork(self, state: State, event: Concretize) -> List[State]:
        try:
            cs, values = self.concretize_values(state, event)
        except SolverUnknown as exc:
            self.terminate(state, TerminationReason(ev.SOLVER_UNKNOWN), str(exc))
            return []
        self._report.concretizations += 1
        if not values:
            self.terminate(state, TerminationReason(ev.ABANDONED), "no feasible value for " + str(event))
            return []
        e = event.expression
        children = []
        for value in values:
            child = state.clone()
            if isinstance(e, E.Constant):
                cond = E.TRUE
            elif e.sort.is_bool:
                cond = e if value else E.not_(e)
            else:
                cond = e.eq(constant_like(e, value))
            child.constraints = cs.add(cond)
            child.retrying = True
            if event.setter is not None:
                event.setter(child, value)
            else:
                child.context.pending[e] = value
            self._assign_id(child)
            children.append(child)
        state.child_counter += len(children)
        state.status = Status.FORKED
        state._bus = None
        if len(children) > 1:
            self._report.forks += 1
        for child in children:
            try:
                self.bus.publish("state_forked", state, child)
            except CallbackError as exc:
                child.messages.append(str(exc))
        for child in children:
            self._push(child)
        return children

    def fork_on_condition(self, state: State, cond: E.Expression) -> List[State]:
        """Split ``state`` on a Bool: children get ``cond`` and ``not cond``."""
        return self._fork(state, Concretize(cond, ev.ALL))

    # -- termination -----------------------------------------------------------------
    def terminate(self, state: State, reason: TerminationReason, message: str = "") -> Outcome:
        state.status = Status.TERMINATED
        state.termination = reason
        state.context.pending.clear()
        if message:
            state.messages.append(message)
        model = None
        if reason.kind != ev.ABANDONED:
            try:
                model = self.solve_model(state)
            except NoModel:
                state.messages.append(f"path infeasible at save time (was {reason})")
                reason = state.termination = TerminationReason(ev.ABANDONED)
            except SolverUnknown as exc:
                state.messages.append(f"model unavailable: {exc}")
        try:
            self.bus.publish("state_terminated", state, reason)
        except (CallbackError, AbandonState, ev.ExecutionEvent) as exc:
            state.messages.append(f"state_terminated callback failed: {exc}")
        testcase = None
        if reason.kind != ev.ABANDONED and self.workspace is not None:
            testcase = self.save_testcase(state, model)
        outcome = Outcome(state.id, str(reason), tuple(state.trace), testcase)
        self._report.outcomes.append(outcome)
        if self.config.keep_states:
            self._report.terminated_states.append(state)
        state._bus = None
        return outcome

    def solve_model(self, state: State) -> Dict[str, int]:
        """Values for every input symbol; symbols the path never constrains get 0."""
        used = {}
        for a in state.constraints.assertions:
            for v in a.variables:
                used[v.name] = v
        names = sorted(n for n, v in used.items() if not v.sort.is_array)
        values = default_solver().get_values(state.constraints, [used[n] for n in names])
        model = {var.name: 0 for var, _ in state.input_registry}
        model.update(zip(names, values))
        return model

    def save_testcase(self, state: State, model: Optional[Dict[str, int]]) -> int:
        lines = [f"termination: {state.termination}", f"state: {state.id}", f"parent: {state.parent_id}"]
        lines += state.messages
        files = {"messages": "\n".join(lines) + "\n", "trace": self.platform.format_trace(state.trace)}
        script = state.constraints.to_smtlib()
        if model is not None:
            files.update(self.platform.testcase_files(state, model))
            decls = state.constraints.declarations
            triples = [(n, decls[n].sort, model[n]) for n in sorted(model) if n in decls and not decls[n].sort.is_array]
            script += "; model\n; " + values_block(triples) + "\n"
        files["smt"] = script
        return self.workspace.save_testcase(files)

    def finalize(self, states: Iterable[State], reason: Optional[TerminationReason] = None) -> ExplorationReport:
        """Terminate states that are still alive (e.g. parked after the last transaction)."""
        reason = reason or ev.Exit(0)
        self._report = ExplorationReport()
        for s in states:
            s._bus = self.bus
            self.terminate(s, reason)
        return self._report
