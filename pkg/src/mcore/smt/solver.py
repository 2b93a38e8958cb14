"""SMT solver session speaking SMT-LIB 2 to an external process.

One process per session.  Assertions are kept on the solver's assertion
stack in push/pop frames; a query whose constraint set extends the
previous one only sends the new assertions.  Solvers that reject
``push`` are driven one script per query instead.
"""

from __future__ import annotations

import atexit
import contextlib
import enum
import logging
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from mcore.smt import expression as E
from mcore.smt.constraints import ConstraintSet
from mcore.smt.smtlib import declaration, parse_value, read_sexprs, term, to_smtlib

logger = logging.getLogger(__name__)

SOLVER_ENV = "MCORE_SOLVER"
DEFAULT_COMMAND = ("z3", "-in", "-smt2")


class SolverError(Exception):
    pass


class SolverUnavailable(SolverError):
    """The solver process could not be started or broke protocol."""


class SolverUnknown(SolverError):
    """The solver answered ``unknown`` (or timed out)."""


class NoModel(SolverError):
    """A value was requested from an unsatisfiable context."""


class Verdict(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass
class SolverResult:
    verdict: Verdict
    model: Optional[dict] = None

    @property
    def is_sat(self) -> bool:
        return self.verdict is Verdict.SAT


@dataclass(frozen=True)
class SolverConfig:
    command: tuple = DEFAULT_COMMAND
    timeout: float = 60.0
    logic: str = "QF_AUFBV"
    incremental: bool = True

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("solver timeout must be positive")

    @classmethod
    def from_env(cls, **kwargs) -> "SolverConfig":
        cmd = os.environ.get(SOLVER_ENV)
        if cmd and "command" not in kwargs:
            kwargs["command"] = tuple(shlex.split(cmd))
        return cls(**kwargs)


@dataclass
class _Frame:
    assertions: tuple
    names: list = field(default_factory=list)


def _next_item(buf: str, start: int = 0):
    """Return (item, end) for the first complete top-level item, or None."""
    i, n = start, len(buf)
    while i < n and buf[i].isspace():
        i += 1
    if i >= n:
        return None
    if buf[i] != "(":
        j = i
        while j < n and not buf[j].isspace():
            j += 1
        if j == n:
            return None
        return buf[i:j], j
    depth = 0
    j = i
    in_str = in_sym = False
    while j < n:
        ch = buf[j]
        if in_str:
            if ch == '"':
                in_str = False
        elif in_sym:
            if ch == "|":
                in_sym = False
        elif ch == '"':
            in_str = True
        elif ch == "|":
            in_sym = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return buf[i : j + 1], j + 1
        j += 1
    return None


class Solver:
    """A single-owner solver session (one query in flight at a time)."""

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig.from_env()
        self.pid = os.getpid()
        self.queries = 0
        self._proc: Optional[subprocess.Popen] = None
        self._buf = ""
        self._frames: list = []
        self._declared: dict = {}
        self._incremental = self.config.incremental

    # -- process plumbing ---------------------------------------------------
    def _start(self):
        try:
            self._proc = subprocess.Popen(
                list(self.config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
        except OSError as exc:
            raise SolverUnavailable(f"cannot start solver {self.config.command!r}: {exc}") from exc
        self._buf = ""
        self._frames = []
        self._declared = {}
        ms = int(self.config.timeout * 1000)
        self._exchange(
            [
                "(set-option :print-success true)",
                "(set-option :produce-models true)",
                f"(set-option :timeout {ms})",
                f"(set-logic {self.config.logic})",
            ],
            tolerate_errors=True,
        )
        if self._incremental:
            answers = self._exchange(["(push 1)", "(pop 1)"], tolerate_errors=True)
            if any(a != "success" for a in answers):
                logger.info("solver rejected push/pop; using one script per query")
                self._incremental = False

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            self._start()

    def _kill(self):
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except Exception:
                pass
        self._proc = None

    def close(self):
        if self._proc is not None and os.getpid() == self.pid:
            try:
                self._proc.stdin.write(b"(exit)\n")
                self._proc.stdin.flush()
                self._proc.wait(timeout=2)
            except Exception:
                self._kill()
        self._proc = None

    def _read_item(self, deadline: float) -> str:
        fd = self._proc.stdout.fileno()
        while True:
            found = _next_item(self._buf)
            if found is not None:
                item, end = found
                self._buf = self._buf[end:]
                return item
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise TimeoutError
            chunk = os.read(fd, 1 << 16)
            if not chunk:
                raise SolverUnavailable("solver process closed its output")
            self._buf += chunk.decode()

    def _exchange(self, commands: Sequence[str], tolerate_errors=False) -> list:
        """Send commands, read exactly one answer per command."""
        text = "\n".join(commands) + "\n"
        deadline = time.monotonic() + self.config.timeout + 10.0
        try:
            self._proc.stdin.write(text.encode())
            self._proc.stdin.flush()
            answers = [self._read_item(deadline) for _ in commands]
        except TimeoutError:
            self._kill()
            raise SolverUnknown("solver did not answer before the deadline")
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise SolverUnavailable(f"solver pipe failed: {exc}") from exc
        if not tolerate_errors:
            for cmd, ans in zip(commands, answers):
                if ans.startswith("(error"):
                    self._kill()
                    raise SolverUnavailable(f"solver rejected {cmd[:120]!r}: {ans}")
        return answers

    # -- assertion stack ----------------------------------------------------
    def _sync(self, cs: ConstraintSet) -> list:
        target = cs.assertions
        matched = 0
        keep = 0
        for frame in self._frames:
            n = len(frame.assertions)
            seg = target[matched : matched + n]
            if len(seg) == n and all(x is y or x == y for x, y in zip(frame.assertions, seg)):
                matched += n
                keep += 1
            else:
                break
        cmds = []
        if keep < len(self._frames):
            for frame in self._frames[keep:]:
                for name in frame.names:
                    del self._declared[name]
            cmds.append(f"(pop {len(self._frames) - keep})")
            del self._frames[keep:]
        rest = target[matched:]
        if rest:
            frame = _Frame(tuple(rest))
            cmds.append("(push 1)")
            cmds.extend(self._declare_for(rest, frame.names))
            cmds.extend(f"(assert {term(a)})" for a in rest)
            self._frames.append(frame)
        return cmds

    def _declare_for(self, exprs: Iterable[E.Expression], names: list) -> list:
        out = []
        for e in exprs:
            for v in sorted(e.variables, key=lambda v: v.name):
                prev = self._declared.get(v.name)
                if prev is None:
                    self._declared[v.name] = v.sort
                    names.append(v.name)
                    out.append(declaration(v))
                elif prev != v.sort:
                    raise E.ExpressionError(f"{v.name} used with two sorts")
        return out

    # -- queries ------------------------------------------------------------
    def _query(self, cs: ConstraintSet, extras: Sequence[E.Expression], values: Sequence[E.Expression]):
        self.queries += 1
        if os.getpid() != self.pid:
            raise SolverError("solver sessions cannot be shared across processes")
        if not self._incremental:
            return self._query_oneshot(cs, extras, values)
        self._ensure()
        cmds = self._sync(cs)
        temp: list = []
        cmds.append("(push 1)")
        cmds.extend(self._declare_for(list(extras) + list(values), temp))
        cmds.extend(f"(assert {term(x)})" for x in extras)
        cmds.append("(check-sat)")
        answers = self._exchange(cmds)
        verdict = Verdict(answers[-1]) if answers[-1] in ("sat", "unsat", "unknown") else None
        if verdict is None:
            self._kill()
            raise SolverUnavailable(f"unexpected check-sat answer {answers[-1]!r}")
        got = None
        tail = []
        if verdict is Verdict.SAT and values:
            tail.append("(get-value (" + " ".join(term(v) for v in values) + "))")
        tail.append("(pop 1)")
        answers = self._exchange(tail)
        for name in temp:
            del self._declared[name]
        if verdict is Verdict.SAT and values:
            pairs = read_sexprs(answers[0])[0]
            got = [parse_value(p[1]) for p in pairs]
        return verdict, got

    def _query_oneshot(self, cs, extras, values):
        script = to_smtlib(cs, E.and_(*extras) if extras else None, self.config.logic)
        for v in values:
            for var in v.variables:
                if var.name not in cs.declarations:
                    script = script.replace("(check-sat)", declaration(var) + "\n(check-sat)", 1)
        if values:
            script += "(get-value (" + " ".join(term(v) for v in values) + "))\n"
        script += "(exit)\n"
        try:
            out = subprocess.run(
                list(self.config.command),
                input=script.encode(),
                capture_output=True,
                timeout=self.config.timeout + 10.0,
            ).stdout.decode()
        except subprocess.TimeoutExpired:
            raise SolverUnknown("solver timed out")
        except OSError as exc:
            raise SolverUnavailable(str(exc)) from exc
        items = [x for x in read_sexprs(out)]
        verdicts = [x for x in items if x in ("sat", "unsat", "unknown")]
        if not verdicts:
            raise SolverUnavailable(f"no verdict in solver output {out[:200]!r}")
        verdict = Verdict(verdicts[0])
        got = None
        if verdict is Verdict.SAT and values:
            pairs = [x for x in items if isinstance(x, list)][-1]
            got = [parse_value(p[1]) for p in pairs]
        return verdict, got

    # -- public API -----------------------------------------------------------
    def check(self, cs: ConstraintSet, extra: Optional[E.Expression] = None) -> SolverResult:
        extras = [] if extra is None else [extra]
        verdict, _ = self._query(cs, extras, [])
        return SolverResult(verdict)

    def is_sat(self, cs: ConstraintSet, extra: Optional[E.Expression] = None) -> bool:
        verdict, _ = self._query(cs, [] if extra is None else [extra], [])
        if verdict is Verdict.UNKNOWN:
            raise SolverUnknown("satisfiability unknown")
        return verdict is Verdict.SAT

    def get_values(self, cs: ConstraintSet, exprs: Sequence[E.Expression], extra=None) -> list:
        symbolic = [e for e in exprs if not isinstance(e, E.Constant)]
        verdict, got = self._query(cs, [] if extra is None else [extra], symbolic)
        if verdict is Verdict.UNKNOWN:
            raise SolverUnknown("satisfiability unknown")
        if verdict is Verdict.UNSAT:
            raise NoModel("constraints are unsatisfiable")
        it = iter(got or [])
        return [e.value if isinstance(e, E.Constant) else next(it) for e in exprs]

    def get_value(self, cs: ConstraintSet, expr: E.Expression, extra=None):
        return self.get_values(cs, [expr], extra)[0]

    def can_be_true(self, cs: ConstraintSet, cond: E.Expression) -> bool:
        if E.is_false(cond):
            return False
        return self.is_sat(cs, cond)

    def must_be_true(self, cs: ConstraintSet, cond: E.Expression) -> bool:
        return not self.is_sat(cs, E.not_(cond))

    def all_values(self, cs: ConstraintSet, expr: E.Expression, cap: int = 64) -> list:
        """Distinct feasible values in discovery order, at most ``cap``."""
        if cap < 1:
            raise ValueError("cap must be >= 1")
        found: list = []
        blocks: list = []
        while len(found) < cap:
            verdict, got = self._query(cs, blocks, [expr])
            if verdict is Verdict.UNKNOWN:
                raise SolverUnknown("satisfiability unknown while enumerating values")
            if verdict is Verdict.UNSAT:
                break
            value = got[0]
            found.append(value)
            blocks.append(E.not_(expr.eq(constant_like(expr, value))))
        return found

    def min_max(self, cs: ConstraintSet, expr: E.Expression) -> tuple:
        """Smallest and largest feasible (unsigned) value, by bisection."""
        if expr.sort.is_bool:
            vals = self.all_values(cs, expr, 2)
            if not vals:
                raise NoModel("constraints are unsatisfiable")
            return min(vals), max(vals)
        start = self.get_value(cs, expr)
        lo, hi = 0, start
        while lo < hi:
            mid = (lo + hi) // 2
            if self.is_sat(cs, expr.ule(mid)):
                hi = mid
            else:
                lo = mid + 1
        low = lo
        lo, hi = start, (1 << expr.width) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.is_sat(cs, expr.uge(mid)):
                lo = mid
            else:
                hi = mid - 1
        return low, lo


def constant_like(expr: E.Expression, value) -> E.Constant:
    if expr.sort.is_bool:
        return E.BoolConstant(bool(value))
    return E.Constant(int(value), expr.sort)


_default: Optional[Solver] = None
_default_config: Optional[SolverConfig] = None


def set_default_config(config: Optional[SolverConfig]) -> None:
    global _default, _default_config
    _default_config = config
    if _default is not None and _default.pid == os.getpid():
        _default.close()
    _default = None


@contextlib.contextmanager
def solver_config(config: Optional[SolverConfig]):
    """Install ``config`` as the default for the block, then restore the previous one."""
    previous = _default_config
    set_default_config(config)
    try:
        yield
    finally:
        set_default_config(previous)


def default_solver() -> Solver:
    """The session owned by the current process (created on first use)."""
    global _default
    if _default is None or _default.pid != os.getpid():
        _default = Solver(_default_config)
    return _default


@atexit.register
def _close_default():
    if _default is not None and _default.pid == os.getpid():
        _default.close()


# Module-level conveniences mirroring the session methods.

def check(cs, extra=None) -> SolverResult:
    return default_solver().check(cs, extra)


def get_value(cs, expr):
    return default_solver().get_value(cs, expr)


def can_be_true(cs, cond) -> bool:
    return default_solver().can_be_true(cs, cond)


def must_be_true(cs, cond) -> bool:
    return default_solver().must_be_true(cs, cond)


def all_values(cs, expr, cap=64) -> list:
    return default_solver().all_values(cs, expr, cap)
