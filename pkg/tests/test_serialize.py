import multiprocessing as mp
import re
import struct

import pytest

from helpers import explore
from mcore.core.engine import Engine, EngineConfig
from mcore.core.serialize import MAGIC, SerializationError, deserialize_state, serialize_state
from mcore.core.workspace import Workspace
from mcore.native.asm import assemble
from mcore.native.cpu import MiniVM, load_program
from programs import branches


def test_roundtrip_continues_identically():
    image = assemble(branches(4))
    engine = Engine(MiniVM(image), EngineConfig(max_instructions=12))
    partial = engine.run([load_program(image, "++++")])
    assert partial.ready
    revived = [deserialize_state(serialize_state(s)) for s in partial.ready]
    for a, b in zip(partial.ready, revived):
        assert (a.id, a.parent_id, a.depth, a.trace, a.status) == (b.id, b.parent_id, b.depth, b.trace, b.status)
        assert list(a.constraints.assertions) == list(b.constraints.assertions)
        assert [v.name for v, _ in a.input_registry] == [v.name for v, _ in b.input_registry]
        assert a.context.regs == b.context.regs and a.context.pc == b.context.pc
    engine.config.max_instructions = None
    rest = Engine(MiniVM(image)).run(revived)
    done = {o.trace for o in partial.outcomes} | rest.traces()
    assert done == explore(branches(4), "++++").traces()


def test_pending_values_survive():
    image = assemble(branches(1))
    st = load_program(image, "+")
    engine = Engine(MiniVM(image), EngineConfig())
    engine._assign_id(st)
    # run until the branch forks, then ship a retrying child
    children = []
    engine.subscribe("state_forked", lambda p, c: children.append(c))
    engine.explore_state(st)
    while not children:
        engine.explore_state(engine._select())
    child = deserialize_state(serialize_state(children[0]))
    assert child.retrying and child.context.pending == children[0].context.pending


def test_evm_state_roundtrip():
    from mcore.evm.asm import assemble as evm_asm
    from mcore.evm.interpreter import EVMContext
    from mcore.evm.world import World
    from mcore.core.state import State

    world = World()
    target = world.create_contract(evm_asm("PUSH1 1 PUSH1 0 SSTORE STOP"))
    st = State(EVMContext(world), platform="evm")
    st.context.begin_transaction(0xC0FFEE00, target, 0, [], "concrete", 1000)
    back = deserialize_state(serialize_state(st))
    assert back.platform == "evm"
    assert back.context.world.accounts_equal(st.context.world)
    assert back.context.frame.code == st.context.frame.code


def test_header_and_layout():
    st = load_program(assemble("HALT"), "+")
    st.id = 7
    blob = serialize_state(st)
    assert blob[:4] == MAGIC and struct.unpack_from("<H", blob, 4) == (1,)
    (n,) = struct.unpack_from("<I", blob, 6)
    assert b'"id": 7' in blob[10 : 10 + n]


def test_rejects_bad_input():
    blob = serialize_state(load_program(assemble("HALT")))
    with pytest.raises(SerializationError):
        deserialize_state(b"XXXX" + blob[4:])
    with pytest.raises(SerializationError):
        deserialize_state(blob[:4] + struct.pack("<H", 99) + blob[6:])
    with pytest.raises(SerializationError):
        deserialize_state(blob[:-200])


class TestWorkspace:
    def test_generated_name(self, tmp_path):
        ws = Workspace(parent=tmp_path)
        assert re.fullmatch(r"mcore_[a-z0-9]{6}", ws.path.name) and ws.path.is_dir()
        assert Workspace(parent=tmp_path).path != ws.path

    def test_dense_ids(self, ws):
        assert [ws.save_testcase({"messages": "m", "trace": ""}) for _ in range(3)] == [0, 1, 2]
        assert ws.testcase_ids() == [0, 1, 2]
        assert ws.read(1, "messages") == "m"

    def test_append(self, ws):
        ws.append("log.jsonl", "a")
        ws.append("log.jsonl", "b\n")
        assert (ws.path / "log.jsonl").read_text() == "a\nb\n"


def _claim_many(path, n, out):
    ws = Workspace(path)
    out.put([ws.save_testcase({"messages": "x"}) for _ in range(n)])


def test_concurrent_claims_are_unique(tmp_path):
    ctx = mp.get_context("fork")
    q = ctx.Queue()
    procs = [ctx.Process(target=_claim_many, args=(tmp_path / "ws", 25, q)) for _ in range(4)]
    for p in procs:
        p.start()
    ids = sum((q.get(timeout=60) for _ in procs), [])
    for p in procs:
        p.join()
    assert sorted(ids) == list(range(100))
