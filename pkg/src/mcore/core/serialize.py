"""Self-contained byte form of a :class:`State`.

Layout: ``MCST`` magic, a little-endian u16 format version, then six
length-prefixed (u32) sections:

1. JSON header (engine version, ids, status, messages, ...)
2. constraint set as an SMT-LIB script
3. platform tag (UTF-8)
4. pickled platform context
5. pickled trace
6. pickled input registry as ``(name, tag)`` pairs
"""

from __future__ import annotations

import json
import pickle
import struct

from mcore import __version__
from mcore.core.events import TerminationReason
from mcore.core.state import State, Status
from mcore.smt.constraints import ConstraintSet
from mcore.smt.smtlib import parse_script, to_smtlib

MAGIC = b"MCST"
FORMAT_VERSION = 1


class SerializationError(ValueError):
    pass


def _pack(sections) -> bytes:
    out = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    for data in sections:
        out.append(struct.pack("<I", len(data)))
        out.append(data)
    return b"".join(out)


def _unpack(blob: bytes) -> list:
    if blob[:4] != MAGIC:
        raise SerializationError("not a serialized state")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != FORMAT_VERSION:
        raise SerializationError(f"unsupported state format version {version}")
    pos = 6
    sections = []
    while pos < len(blob):
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        sections.append(blob[pos : pos + n])
        pos += n
    if len(sections) != 6:
        raise SerializationError(f"expected 6 sections, found {len(sections)}")
    return sections


def serialize_state(state: State) -> bytes:
    header = {
        "engine": __version__,
        "id": state.id,
        "parent_id": state.parent_id,
        "status": state.status.value,
        "child_counter": state.child_counter,
        "depth": state.depth,
        "retrying": state.retrying,
        "termination": None if state.termination is None else str(state.termination),
        "messages": state.messages,
    }
    registry = [(var.name, tag) for var, tag in state.input_registry]
    return _pack(
        [
            json.dumps(header).encode(),
            to_smtlib(state.constraints).encode(),
            state.platform.encode(),
            pickle.dumps(state.context, protocol=pickle.HIGHEST_PROTOCOL),
            pickle.dumps(state.trace, protocol=pickle.HIGHEST_PROTOCOL),
            pickle.dumps(registry, protocol=pickle.HIGHEST_PROTOCOL),
        ]
    )


def deserialize_state(blob: bytes) -> State:
    header_b, smt_b, platform_b, context_b, trace_b, registry_b = _unpack(blob)
    header = json.loads(header_b)
    declared, assertions = parse_script(smt_b.decode())
    cs = ConstraintSet(assertions, declared)
    state = State(pickle.loads(context_b), cs, platform_b.decode())
    state.id = header["id"]
    state.parent_id = header["parent_id"]
    state.status = Status(header["status"])
    state.child_counter = header["child_counter"]
    state.depth = header["depth"]
    state.retrying = header["retrying"]
    if header["termination"] is not None:
        state.termination = TerminationReason.parse(header["termination"])
    state.messages = list(header["messages"])
    state.trace = pickle.loads(trace_b)
    state.input_registry = [(declared[name], tag) for name, tag in pickle.loads(registry_b)]
    return state
