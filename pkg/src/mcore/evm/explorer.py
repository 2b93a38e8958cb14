"""Multi-transaction driver: world setup, symbolic transactions, finalization."""

from __future__ import annotations

import logging
from typing import List, Optional

from mcore.core.engine import Engine, EngineConfig, ExplorationReport
from mcore.core.events import Exit
from mcore.core.state import State
from mcore.core.workspace import Workspace
from mcore.evm import opcodes as ops
from mcore.evm.coverage import CoverageMap
from mcore.evm.interpreter import EVM, PLATFORM, EVMContext
from mcore.evm.world import CALLER_BALANCE, DEFAULT_CALLER, World
from mcore.smt import expression as E

logger = logging.getLogger(__name__)


class EVMExplorer:
    """Drives the engine one transaction at a time.

    States that finish a transaction normally stay alive (parked) and
    receive the next transaction; states that revert or fail terminate
    right away.  :meth:`finalize` terminates the survivors.
    """

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        workspace: Optional[Workspace] = None,
        gas_budget: int = ops.DEFAULT_GAS_BUDGET,
        caller: int = DEFAULT_CALLER,
    ):
        self.platform = EVM()
        self.engine = Engine(self.platform, config, workspace)
        self.workspace = workspace
        self.gas_budget = gas_budget
        self.caller = caller
        world = World()
        world.create_account(CALLER_BALANCE, address=caller)
        self.world = world
        self.alive: List[State] = []
        self.reports: List[ExplorationReport] = []
        self.finalized = False
        self._started = False

    # -- registration passthrough --------------------------------------------------------
    def subscribe(self, kind, callback):
        self.engine.subscribe(kind, callback)

    def register_hook(self, location, callback):
        self.engine.register_hook(location, callback)

    # -- world setup (before the first transaction) ---------------------------------------
    def _setup_world(self) -> World:
        if self._started:
            raise RuntimeError("accounts must be created before the first transaction")
        return self.world

    def create_account(self, balance=0, address: Optional[int] = None) -> int:
        return self._setup_world().create_account(balance, address)

    def create_contract(self, code: bytes, balance=0, address: Optional[int] = None) -> int:
        return self._setup_world().create_contract(bytes(code), balance, address)

    def _start(self) -> None:
        if not self._started:
            self._started = True
            self.alive = [State(EVMContext(self.world), platform=PLATFORM)]

    # -- transactions ---------------------------------------------------------------
    def apply_symbolic_transaction(self, target: int, data_size: int, caller: Optional[int] = None) -> ExplorationReport:
        """Fresh symbolic value and ``data_size`` symbolic data bytes for every live state."""
        self._start()
        if not self.alive:
            logger.warning("no ready states; symbolic transaction skipped")
            return ExplorationReport()
        caller = self.caller if caller is None else caller
        for state in self.alive:
            ctx: EVMContext = state.context
            n = len(ctx.transactions)
            value = state.new_symbolic_value(256, f"txvalue_{n}", ("txvalue", n))
            data = [state.new_symbolic_value(8, f"txdata_{n}_{i}", ("txdata", n, i)) for i in range(data_size)]
            state.constrain(value.ule(ctx.world.get(caller).balance))
            tx = ctx.begin_transaction(caller, target, value, data, "symbolic", self.gas_budget)
            state._bus = self.engine.bus
            state.publish("symbolic_transaction_applied", tx)
        return self._run()

    def apply_concrete_transaction(self, target: int, data: bytes = b"", value: int = 0, caller: Optional[int] = None) -> ExplorationReport:
        self._start()
        caller = self.caller if caller is None else caller
        for state in self.alive:
            state.context.begin_transaction(caller, target, value, [E.bv(b, 8) for b in data], "concrete", self.gas_budget)
        return self._run()

    def _run(self) -> ExplorationReport:
        report = self.engine.run(self.alive)
        self.alive = report.parked + report.ready
        self.reports.append(report)
        return report

    def finalize(self) -> list:
        """Terminate every live state (Exit(0)) and write its test case."""
        final = self.engine.finalize(self.alive, Exit(0))
        self.reports.append(final)
        self.alive = []
        self.finalized = True
        return final.outcomes

    # -- results -------------------------------------------------------------------
    @property
    def outcomes(self) -> list:
        return [o for r in self.reports for o in r.outcomes]

    @property
    def terminated_states(self) -> list:
        return [s for r in self.reports for s in r.terminated_states]

    def coverage(self) -> CoverageMap:
        cov = CoverageMap()
        for addr, acct in self.world.accounts.items():
            if acct.code:
                cov.add_account(addr, acct.code)
        for o in self.outcomes:
            cov.record(o.trace)
        for s in self.alive:
            cov.record(s.trace)
        return cov
