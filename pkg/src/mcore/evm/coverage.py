"""Instruction coverage per contract account."""

from __future__ import annotations

from typing import Dict, Iterable, Set

from mcore.evm.opcodes import instruction_offsets


class CoverageMap:
    def __init__(self):
        self.denominator: Dict[int, Set[int]] = {}
        self.executed: Dict[int, Set[int]] = {}

    def add_account(self, address: int, code: bytes) -> None:
        self.denominator[address] = set(instruction_offsets(code))
        self.executed.setdefault(address, set())

    def record(self, trace: Iterable) -> None:
        for addr, pc in trace:
            valid = self.denominator.get(addr)
            if valid is not None and pc in valid:
                self.executed[addr].add(pc)

    def percent(self, address: int) -> float:
        total = len(self.denominator[address])
        return 100.0 * len(self.executed[address]) / total if total else 100.0

    def aggregate(self) -> float:
        total = sum(len(d) for d in self.denominator.values())
        done = sum(len(e) for e in self.executed.values())
        return 100.0 * done / total if total else 100.0

    def report(self) -> str:
        """Lines ``address, executed, total, percent`` plus an aggregate line."""
        lines = []
        for addr in sorted(self.denominator):
            total = len(self.denominator[addr])
            done = len(self.executed[addr])
            lines.append(f"{addr:#042x}, {done}, {total}, {self.percent(addr):.2f}")
        total = sum(len(d) for d in self.denominator.values())
        done = sum(len(e) for e in self.executed.values())
        lines.append(f"aggregate, {done}, {total}, {self.aggregate():.2f}")
        return "\n".join(lines) + "\n"
