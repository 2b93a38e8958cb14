"""Command-line front end.

    mcore [native] TARGET [ARG ...] [--data HEX] [--procs N] ...
    mcore evm CODE.hex [--txlimit N] [--txdatasize M] ...
    mcore replay WORKSPACE TEST_ID TARGET

In argument specs ``+`` stands for one symbolic byte.  Exit codes: 0 on
success, 1 on a replay mismatch, 2 for usage errors, 3 when the time
budget ran out (partial results), 4 for internal errors.
"""

from __future__ import annotations

import argparse
import binascii
import logging
import shlex
import sys
import time
from pathlib import Path
from typing import List, Optional

from mcore import __version__
from mcore.core.engine import Engine, EngineConfig, EngineError
from mcore.core.events import Policy
from mcore.core.workspace import Workspace
from mcore.smt.solver import SolverConfig, SolverError, solver_config

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
EXIT_INTERNAL = 4

DEFAULT_STDIN_SIZE = 256
DEFAULT_TIMEOUT = 300.0
MODES = ("native", "evm", "replay")

logger = logging.getLogger("mcore")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _hex_bytes(text: str) -> bytes:
    text = text[2:] if text.lower().startswith("0x") else text
    try:
        return binascii.unhexlify(text)
    except (binascii.Error, ValueError):
        raise argparse.ArgumentTypeError(f"malformed hex: {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--procs", type=_positive_int, default=1, help="worker processes (default 1)")
    p.add_argument("--timeout", type=_positive_float, default=DEFAULT_TIMEOUT, help="wall-clock budget in seconds (default 300)")
    p.add_argument("--policy", choices=("all", "one", "minmax"), default="all", help="default concretization policy")
    p.add_argument("--policy-cap", type=_positive_int, default=64, help="value cap of the ALL policy")
    p.add_argument("--strategy", choices=("fifo", "lifo", "random"), default="fifo", help="ready-state selection")
    p.add_argument("--seed", type=int, default=None, help="seed for --strategy random")
    p.add_argument("--workspace", default=None, help="output directory (default mcore_XXXXXX)")
    p.add_argument("--solver", default=None, help="solver command line (default: $MCORE_SOLVER or 'z3 -in -smt2')")
    p.add_argument("--solver-timeout", type=_positive_float, default=60.0, help="per-query solver timeout in seconds")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcore", description="Dynamic symbolic execution for MiniVM programs and EVM bytecode.")
    parser.add_argument("--version", action="version", version=f"mcore {__version__}")
    sub = parser.add_subparsers(dest="mode", parser_class=_Parser)

    p = sub.add_parser("native", help="explore a MiniVM program image")
    p.add_argument("target", help="raw MiniVM image (or .asm source)")
    p.add_argument("argv", nargs="*", help="program arguments; '+' marks a symbolic byte")
    p.add_argument("--data", type=_hex_bytes, default=b"", help="hex bytes prefixed to the symbolic stdin")
    p.add_argument("--stdin-size", type=_nonneg_int, default=DEFAULT_STDIN_SIZE, help="symbolic stdin bytes after --data (default 256)")
    p.add_argument("--memory-model", choices=("concretizing", "fully-symbolic"), default="concretizing")
    _common(p)

    p = sub.add_parser("evm", help="explore EVM runtime bytecode")
    _evm_arguments(p)

    p = sub.add_parser("replay", help="re-run a native test case concretely")
    p.add_argument("workspace")
    p.add_argument("test_id", type=_nonneg_int)
    p.add_argument("target")
    return parser


def _evm_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("target", help="hex-encoded runtime bytecode file")
    p.add_argument("--txlimit", type=_positive_int, default=1, help="number of symbolic transactions (default 1)")
    p.add_argument("--txdatasize", type=_nonneg_int, default=36, help="symbolic calldata bytes per transaction (default 36)")
    p.add_argument("--gas", type=_positive_int, default=10_000_000, help="gas budget per transaction")
    p.add_argument("--detect-overflow", action="store_true", help="record possible ADD/MUL wrap-arounds in findings.jsonl")
    _common(p)


def parse_args(argv: List[str]) -> argparse.Namespace:
    argv = list(argv)
    if argv and argv[0] not in MODES and not argv[0].startswith("-"):
        argv.insert(0, "native")
    ns = build_parser().parse_args(argv)
    if ns.mode is None:
        raise UsageError("mcore: missing mode or target")
    return ns


def _engine_config(ns) -> EngineConfig:
    solver = SolverConfig.from_env(timeout=ns.solver_timeout)
    if ns.solver:
        solver = SolverConfig(command=tuple(shlex.split(ns.solver)), timeout=ns.solver_timeout)
    kind = ns.policy.upper()
    policy = Policy(kind, ns.policy_cap if kind == "ALL" else (1 if kind == "ONE" else 2))
    return EngineConfig(
        workers=ns.procs,
        strategy=ns.strategy,
        seed=ns.seed,
        policy=policy,
        timeout=ns.timeout,
        solver=solver,
        keep_states=False,
    )


def _read_target(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc.strerror}") from None


def load_image(path: str) -> bytes:
    data = _read_target(path, "target")
    if path.endswith((".asm", ".s")):
        from mcore.native.asm import assemble

        return assemble(data.decode())
    return data


def stdin_spec(data: bytes, size: int) -> list:
    """Concrete ``data`` followed by ``size`` symbolic bytes."""
    return list(data) + [None] * size


def run_native(ns) -> int:
    from mcore.native.cpu import LoadError, MiniVM, load_program
    from mcore.native.minios import parse_byte_spec

    image = load_image(ns.target)
    try:
        state = load_program(image, stdin_spec(ns.data, ns.stdin_size), [parse_byte_spec(a) for a in ns.argv], ns.memory_model)
    except LoadError as exc:
        raise UsageError(f"cannot load {ns.target}: {exc}") from None
    ws = Workspace(ns.workspace)
    engine = Engine(MiniVM(image), _engine_config(ns), ws)
    report = engine.run([state])
    locations = {loc for o in report.outcomes for loc in o.trace}
    total = len(image) // 8
    print(f"workspace: {ws.path}")
    print(f"states: {report.states_created} created, {report.terminated} terminated, {report.abandoned} abandoned, {len(report.ready)} unexplored")
    print(f"forks: {report.forks}; instructions: {report.instructions}; time: {report.wall_time:.2f}s")
    if total:
        covered = len({loc for loc in locations if 0x1000 <= loc < 0x1000 + len(image)})
        print(f"coverage: {covered}/{total} instructions ({100.0 * covered / total:.2f}%)")
    for reason, n in sorted(report.reasons.items()):
        print(f"  {reason}: {n}")
    if report.timed_out:
        print("timeout: exploration stopped early; results are partial")
        return EXIT_TIMEOUT
    return EXIT_OK


def run_evm(ns) -> int:
    from mcore.evm.detectors import IntegerOverflowDetector
    from mcore.evm.explorer import EVMExplorer

    text = _read_target(ns.target, "bytecode").decode(errors="replace").strip()
    try:
        code = _hex_bytes("".join(text.split()))
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{ns.target}: {exc}") from None
    ws = Workspace(ns.workspace)
    config = _engine_config(ns)
    explorer = EVMExplorer(config, ws, gas_budget=ns.gas)
    if ns.detect_overflow:
        IntegerOverflowDetector(ws).attach(explorer)
    target = explorer.create_contract(code)
    deadline = time.time() + ns.timeout
    timed_out = False
    for _ in range(ns.txlimit):
        config.timeout = max(deadline - time.time(), 1e-3)
        report = explorer.apply_symbolic_transaction(target, ns.txdatasize)
        if report.timed_out:
            timed_out = True
            break
        if not explorer.alive:
            break
    if timed_out:
        # unfinished transactions are dropped, not written
        explorer.alive = [s for s in explorer.alive if not s.context.frames]
    explorer.finalize()
    cov = explorer.coverage()
    ws.write("coverage.txt", cov.report())
    outcomes = explorer.outcomes
    print(f"workspace: {ws.path}")
    print(f"states: {sum(1 for o in outcomes if not o.abandoned)} terminated, {sum(1 for o in outcomes if o.abandoned)} abandoned")
    print(f"coverage: {cov.aggregate():.2f}%")
    if timed_out:
        print("timeout: exploration stopped early; results are partial")
        return EXIT_TIMEOUT
    return EXIT_OK


def run_replay(ns) -> int:
    from mcore.native.replay import replay_testcase

    ws = Path(ns.workspace)
    prefix = ws / f"test_{ns.test_id:08d}"
    if Path(f"{prefix}.input").exists() and not Path(f"{prefix}.stdin").exists():
        print("error: replay supports native test cases only (this is an EVM test case)", file=sys.stderr)
        return EXIT_USAGE
    for suffix in ("stdin", "trace", "messages"):
        if not Path(f"{prefix}.{suffix}").exists():
            print(f"error: missing {prefix}.{suffix}", file=sys.stderr)
            return EXIT_USAGE
    image = load_image(ns.target)
    result = replay_testcase(ws, ns.test_id, image)
    print(result.describe())
    return EXIT_OK if result.match else EXIT_MISMATCH


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        ns = parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING)
        # the solver override lasts for this invocation only
        with solver_config(None):
            if ns.mode == "native":
                return run_native(ns)
            if ns.mode == "evm":
                return run_evm(ns)
            return run_replay(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngineError, SolverError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except KeyboardInterrupt:
        return EXIT_INTERNAL


def evm_main(argv: Optional[List[str]] = None) -> int:
    """``mcore-evm CODE.hex ...``: shorthand for ``mcore evm``."""
    argv = sys.argv[1:] if argv is None else argv
    return main(["evm"] + list(argv))


if __name__ == "__main__":
    sys.exit(main())
