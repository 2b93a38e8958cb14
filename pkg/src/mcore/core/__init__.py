"""Platform-agnostic exploration engine."""

from mcore.core.engine import Engine, EngineConfig, EngineError, ExplorationReport, Outcome
from mcore.core.events import (
    ALL,
    MINMAX,
    ONE,
    AbandonState,
    Concretize,
    EventBus,
    Exit,
    HookRegistry,
    Park,
    Policy,
    Terminate,
    TerminationReason,
)
from mcore.core.serialize import deserialize_state, serialize_state
from mcore.core.state import State, Status
from mcore.core.workspace import Workspace
