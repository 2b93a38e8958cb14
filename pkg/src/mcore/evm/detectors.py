"""Analyses built on the event bus."""

from __future__ import annotations

import json
from typing import List, Optional

from mcore.core.workspace import Workspace
from mcore.smt import expression as E
from mcore.smt.solver import SolverUnknown, default_solver

FINDINGS_FILE = "findings.jsonl"


class IntegerOverflowDetector:
    """Flags ADD/MUL results that can wrap modulo 2**256.

    Subscribe with :meth:`attach`.  Each finding records the state id, the
    location, both operands and a witness model; it is appended to
    ``findings.jsonl`` in the workspace (when one is given) and kept in
    :attr:`findings`.  Exploration itself is not affected.
    """

    def __init__(self, workspace: Optional[Workspace] = None):
        self.workspace = workspace
        self.findings: List[dict] = []

    def attach(self, target) -> "IntegerOverflowDetector":
        target.subscribe("did_execute_instruction", self.on_instruction)
        return self

    @staticmethod
    def wrap_condition(mnemonic: str, a: E.Expression, b: E.Expression, result: E.Expression) -> Optional[E.Expression]:
        if mnemonic == "ADD":
            return result.ult(a)
        if mnemonic == "MUL":
            return E.and_(E.not_(a.eq(0)), E.not_(result.udiv(a).eq(b)))
        return None

    def on_instruction(self, state, location, mnemonic, args, results) -> None:
        if mnemonic not in ("ADD", "MUL"):
            return
        a, b = args
        cond = self.wrap_condition(mnemonic, a, b, results[0])
        if E.is_false(cond):
            return
        finding = {"state": state.id, "address": hex(location[0]), "pc": location[1], "op": mnemonic}
        try:
            if not state.can_be_true(cond):
                return
            cs = state.constraints.add(cond)
            names = sorted({v.name: v for v in cond.variables}.items())
            values = default_solver().get_values(cs, [a, b] + [v for _, v in names])
            finding["status"] = "possible"
            finding["a"] = hex(values[0])
            finding["b"] = hex(values[1])
            finding["witness"] = {n: hex(v) for (n, _), v in zip(names, values[2:])}
        except SolverUnknown:
            finding["status"] = "unknown"
        self.findings.append(finding)
        if self.workspace is not None:
            self.workspace.append(FINDINGS_FILE, json.dumps(finding, sort_keys=True))


def read_findings(workspace: Workspace) -> list:
    if not workspace.exists(FINDINGS_FILE):
        return []
    text = (workspace.path / FINDINGS_FILE).read_text()
    return [json.loads(line) for line in text.splitlines() if line.strip()]
