"""Concrete re-execution of generated test cases."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from mcore import kernels
from mcore.core.events import TerminationReason
from mcore.native import isa


def concrete_replay(image: bytes, stdin: bytes, argv: Optional[Sequence[bytes]] = None, max_steps: int = 10_000_000):
    """Run ``image`` on concrete input: ``(termination, trace, stdout)``."""
    blob = isa.argv_image(list(argv)) if argv else b""
    kind, detail, trace, stdout = kernels.run_concrete(bytes(image), bytes(stdin), blob, max_steps)
    return TerminationReason(kind, detail), list(trace), stdout


@dataclass
class ReplayResult:
    match: bool
    expected_termination: str
    actual_termination: str
    expected_trace: list
    actual_trace: list
    stdout_match: bool

    def describe(self) -> str:
        if self.match:
            return "MATCH"
        why = []
        if self.expected_termination != self.actual_termination:
            why.append(f"termination {self.actual_termination} != recorded {self.expected_termination}")
        if self.expected_trace != self.actual_trace:
            n = next(
                (i for i, (a, b) in enumerate(zip(self.expected_trace, self.actual_trace)) if a != b),
                min(len(self.expected_trace), len(self.actual_trace)),
            )
            why.append(f"trace diverges at step {n}")
        return "MISMATCH: " + "; ".join(why)


def _parse_trace(text: str) -> list:
    return [int(line, 16) for line in text.split()]


def recorded_termination(messages: str) -> str:
    for line in messages.splitlines():
        if line.startswith("termination:"):
            return line.split(":", 1)[1].strip()
    raise ValueError("messages file has no termination line")


def replay_testcase(workspace, test_id: int, image: bytes) -> ReplayResult:
    """Replay ``test_<id>`` of a native workspace against ``image``."""
    ws = Path(getattr(workspace, "path", workspace))
    prefix = ws / f"test_{test_id:08d}"
    stdin = Path(f"{prefix}.stdin").read_bytes()
    argv_path = Path(f"{prefix}.argv")
    argv = [bytes.fromhex(line) for line in argv_path.read_text().splitlines()] if argv_path.exists() else []
    expected_trace = _parse_trace(Path(f"{prefix}.trace").read_text())
    expected_term = recorded_termination(Path(f"{prefix}.messages").read_text())
    term, trace, stdout = concrete_replay(image, stdin, argv)
    stdout_path = Path(f"{prefix}.stdout")
    stdout_match = not stdout_path.exists() or stdout_path.read_bytes() == stdout
    match = str(term) == expected_term and trace == expected_trace and stdout_match
    return ReplayResult(match, expected_term, str(term), expected_trace, trace, stdout_match)
