"""Symbolic EVM interpreter over 256-bit expression words.

Instructions follow the engine's retry discipline: every concretization
happens before the first mutation, so an interrupted instruction can be
executed again from scratch in each child state.
"""

from __future__ import annotations

from typing import List, Optional

from mcore import kernels
from mcore.core.events import (
    ALL,
    INVALID_INSTRUCTION,
    ONE,
    OUT_OF_GAS,
    REVERT,
    Concretize,
    Park,
    Policy,
    Terminate,
    TerminationReason,
)
from mcore.core.state import Context, State
from mcore.evm import opcodes as ops
from mcore.evm.world import ADDRESS_MASK, World, word
from mcore.smt import expression as E

PLATFORM = "evm"
MEMORY_LIMIT = 1 << 22  # offsets past this are treated as exhausting gas

_ZERO = E.bv(0, 256)
_ONE = E.bv(1, 256)
_ZERO8 = E.bv(0, 8)


def _flag(cond: E.Expression) -> E.Expression:
    return E.ite(cond, _ONE, _ZERO)


def _bytes_word(parts: list) -> E.Expression:
    """Big-endian 32 byte expressions -> one word."""
    return E.concat(*parts)


def _word_bytes(w: E.Expression, n: int = 32) -> list:
    return [w.extract(8 * (n - 1 - i) + 7, 8 * (n - 1 - i)) for i in range(n)]


class Transaction:
    __slots__ = ("caller", "target", "value", "data", "kind", "index")

    def __init__(self, caller: int, target: int, value: E.Expression, data: list, kind: str, index: int):
        self.caller = caller
        self.target = target
        self.value = value
        self.data = data
        self.kind = kind
        self.index = index

    def __repr__(self):
        return f"<Transaction {self.index} {self.kind} {self.caller:#x}->{self.target:#x} data={len(self.data)}B>"


class Frame:
    __slots__ = (
        "address", "caller", "value", "calldata", "code", "pc", "stack", "memory",
        "msize", "snapshot", "ret_offset", "ret_size", "returndata", "jumpdests",
    )

    def __init__(self, address: int, caller: int, value: E.Expression, calldata: list, code: bytes, snapshot: World, ret_offset: int = 0, ret_size: int = 0):
        self.address = address
        self.caller = caller
        self.value = value
        self.calldata = calldata
        self.code = code
        self.pc = 0
        self.stack: List[E.Expression] = []
        self.memory: dict = {}
        self.msize = 0
        self.snapshot = snapshot
        self.ret_offset = ret_offset
        self.ret_size = ret_size
        self.returndata: list = []
        self.jumpdests = ops.jumpdests(code)

    def copy(self) -> "Frame":
        f = Frame.__new__(Frame)
        for k in Frame.__slots__:
            setattr(f, k, getattr(self, k))
        f.stack = list(self.stack)
        f.memory = dict(self.memory)
        return f

    def __getstate__(self):
        return {k: getattr(self, k) for k in Frame.__slots__}

    def __setstate__(self, d):
        for k, v in d.items():
            setattr(self, k, v)

    # memory with concrete offsets; unwritten bytes read as zero
    def mem_read(self, offset: int, size: int) -> list:
        if size == 0:
            return []
        self.touch(offset, size)
        mem = self.memory
        return [mem.get(offset + i, _ZERO8) for i in range(size)]

    def mem_write(self, offset: int, data: list) -> None:
        if not data:
            return
        self.touch(offset, len(data))
        for i, b in enumerate(data):
            self.memory[offset + i] = b

    def touch(self, offset: int, size: int) -> None:
        if size:
            self.msize = max(self.msize, (offset + size + 31) // 32 * 32)


class EVMContext(Context):
    def __init__(self, world: World):
        super().__init__()
        self.world = world
        self.frames: List[Frame] = []
        self.gas = 0
        self.transactions: List[Transaction] = []
        self.tx_snapshot: Optional[World] = None
        self.last_returndata: list = []
        self.last_result: Optional[str] = None

    def clone(self) -> "EVMContext":
        c = EVMContext.__new__(EVMContext)
        c.pending = dict(self.pending)
        c.world = self.world.clone()
        c.frames = [f.copy() for f in self.frames]
        c.gas = self.gas
        c.transactions = list(self.transactions)
        c.tx_snapshot = self.tx_snapshot
        c.last_returndata = self.last_returndata
        c.last_result = self.last_result
        return c

    @property
    def frame(self) -> Frame:
        return self.frames[-1]

    def begin_transaction(self, caller: int, target: int, value, data: list, kind: str, gas: int) -> Transaction:
        """Snapshot the world, move ``value`` to the target and enter its code."""
        world = self.world
        snapshot = world.clone()
        world.tx_count += 1
        value = word(value)
        tx = Transaction(caller, target, value, list(data), kind, len(self.transactions))
        self.transactions.append(tx)
        src = world.get(caller)
        dst = world.get(target)
        src.balance = src.balance - value
        dst.balance = dst.balance + value
        self.tx_snapshot = snapshot
        self.gas = gas
        self.frames = [Frame(target, caller, value, tx.data, dst.code, snapshot)]
        self.last_returndata = []
        self.last_result = None
        return tx

    def restore(self, snapshot: World) -> None:
        """Roll accounts back; hash pairs and the transaction counter are kept."""
        pairs, count = self.world.sha3_pairs, self.world.tx_count
        self.world = snapshot.clone()
        self.world.sha3_pairs = list(pairs)
        self.world.tx_count = count


class _Fail(Exception):
    def __init__(self, kind: str, message: str = "", returndata=()):
        super().__init__(message or kind)
        self.kind = kind
        self.message = message
        self.returndata = list(returndata)


def _u(ctx: EVMContext, e: E.Expression, what: str, policy=None) -> int:
    return ctx.concretize(e, policy, what)


def _offset(ctx: EVMContext, e: E.Expression, size: int, what: str) -> int:
    """Concrete memory offset; ``size`` is the already concrete length."""
    if size == 0:
        return 0
    off = _u(ctx, e, what)
    if off + size > MEMORY_LIMIT:
        raise _Fail(OUT_OF_GAS, f"{what} {off:#x}+{size} exceeds the memory limit")
    return off


def _size(ctx: EVMContext, e: E.Expression, what: str) -> int:
    size = _u(ctx, e, what)
    if size > MEMORY_LIMIT:
        raise _Fail(OUT_OF_GAS, f"{what} {size:#x} exceeds the memory limit")
    return size


class EVM:
    """Backend object handed to :class:`~mcore.core.engine.Engine`."""

    name = PLATFORM

    def location(self, state: State):
        f = state.context.frames[-1]
        return (f.address, f.pc)

    def format_trace(self, trace) -> str:
        return "".join(f"{addr:#042x}:{pc:#x}\n" for addr, pc in trace)

    def testcase_files(self, state: State, model: dict) -> dict:
        from mcore.smt.evaluate import evaluate

        lines = []
        for tx in state.context.transactions:
            value = evaluate(tx.value, model)
            data = bytes(evaluate(b, model) for b in tx.data)
            lines.append(f"{tx.kind} caller={tx.caller:#042x} target={tx.target:#042x} value={value:#x} data={data.hex()}")
        return {"input": "\n".join(lines) + "\n"}

    # -- one instruction ------------------------------------------------------------------
    def execute(self, state: State) -> None:
        ctx: EVMContext = state.context
        f = ctx.frames[-1]
        pc = f.pc
        op = f.code[pc] if pc < len(f.code) else 0x00
        info = ops.OPCODES.get(op)
        try:
            if info is None:
                raise _Fail(INVALID_INSTRUCTION, f"invalid opcode {op:#04x} at {pc:#x}")
            depth = len(f.stack)
            if depth < info.pops:
                raise _Fail(INVALID_INSTRUCTION, f"stack underflow in {info.mnemonic} at {pc:#x}")
            if depth - info.pops + info.pushes > ops.MAX_STACK:
                raise _Fail(INVALID_INSTRUCTION, f"stack overflow in {info.mnemonic} at {pc:#x}")
            args = [f.stack[-1 - i] for i in range(info.pops)]
            handler = _HANDLERS.get(info.mnemonic) or _family_handler(info.mnemonic)
            handler(self, state, ctx, f, info, args)
        except _Fail as failure:
            self._fail(state, ctx, failure)

    # -- commit helpers -------------------------------------------------------------------
    def _charge(self, ctx: EVMContext, cost: int) -> None:
        if ctx.gas < cost:
            raise _Fail(OUT_OF_GAS, f"out of gas (need {cost}, have {ctx.gas})")
        ctx.gas -= cost

    def _commit(self, state, ctx, f, info, args, results, next_pc=None, cost=None):
        self._charge(ctx, info.gas if cost is None else cost)
        if info.pops:
            del f.stack[-info.pops:]
        f.stack.extend(results)
        loc = (f.address, f.pc)
        f.pc = f.pc + 1 + info.immediate if next_pc is None else next_pc
        state.publish("did_execute_instruction", loc, info.mnemonic, args, results)

    def _fail(self, state: State, ctx: EVMContext, failure: _Fail) -> None:
        f = ctx.frames.pop()
        ctx.restore(f.snapshot)
        reason = TerminationReason(failure.kind)
        if not ctx.frames:
            ctx.last_returndata = failure.returndata
            ctx.last_result = failure.kind
            raise Terminate(reason, failure.message)
        caller = ctx.frames[-1]
        caller.returndata = failure.returndata
        caller.stack.append(_ZERO)
        caller.pc += 1
        state.messages.append(f"call into {f.address:#x} failed: {failure.message or failure.kind}")

    def _finish_frame(self, state: State, ctx: EVMContext, data: list) -> None:
        """STOP/RETURN: commit the frame, park at the outermost level."""
        f = ctx.frames.pop()
        if not ctx.frames:
            ctx.last_returndata = data
            ctx.last_result = "Return"
            raise Park()
        caller = ctx.frames[-1]
        caller.returndata = data
        n = min(len(data), f.ret_size)
        caller.mem_write(f.ret_offset, data[:n])
        caller.stack.append(_ONE)
        caller.pc += 1


# -- handlers ---------------------------------------------------------------------------
# signature: (evm, state, ctx, frame, info, args) -> None; args[0] is the stack top


def _binary(fn):
    def handler(evm, state, ctx, f, info, args):
        evm._commit(state, ctx, f, info, args, [fn(args[0], args[1])])

    return handler


def _unary(fn):
    def handler(evm, state, ctx, f, info, args):
        evm._commit(state, ctx, f, info, args, [fn(args[0])])

    return handler


def _div(a, b):
    return E.ite(b.eq(0), _ZERO, a.udiv(b))


def _sdiv(a, b):
    return E.ite(b.eq(0), _ZERO, a.sdiv(b))


def _mod(a, b):
    return E.ite(b.eq(0), _ZERO, a.urem(b))


def _smod(a, b):
    return E.ite(b.eq(0), _ZERO, a.srem(b))


def _byte(i, x):
    shift = (E.bv(31, 256) - i) * 8
    return E.ite(i.ult(32), (x >> shift) & 0xFF, _ZERO)


def _op_stop(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [])
    evm._finish_frame(state, ctx, [])


def _op_return(evm, state, ctx, f, info, args):
    size = _size(ctx, args[1], "RETURN size")
    off = _offset(ctx, args[0], size, "RETURN offset")
    evm._commit(state, ctx, f, info, args, [])
    evm._finish_frame(state, ctx, f.mem_read(off, size))


def _op_revert(evm, state, ctx, f, info, args):
    size = _size(ctx, args[1], "REVERT size")
    off = _offset(ctx, args[0], size, "REVERT offset")
    evm._commit(state, ctx, f, info, args, [])
    raise _Fail(REVERT, "", f.mem_read(off, size))


def _op_sha3(evm, state, ctx, f, info, args):
    size = _size(ctx, args[1], "SHA3 size")
    off = _offset(ctx, args[0], size, "SHA3 offset")
    data = [f.memory.get(off + i, _ZERO8) for i in range(size)]
    if all(isinstance(b, E.Constant) for b in data):
        preimage = bytes(b.value for b in data)
    else:
        value = ctx.concretize(E.concat(*data), ONE, "SHA3 preimage")
        preimage = value.to_bytes(size, "big")
    digest = kernels.keccak256(preimage)
    cost = info.gas + ops.SHA3_WORD_GAS * ((size + 31) // 32)
    evm._commit(state, ctx, f, info, args, [E.bv(int.from_bytes(digest, "big"), 256)], cost=cost)
    f.touch(off, size)
    ctx.world.record_sha3(preimage, digest)


def _op_address(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(f.address, 256)])


def _op_balance(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [ctx.world.balance_of(args[0])])


def _op_caller(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(f.caller, 256)])


def _op_callvalue(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [f.value])


def _calldata_slice(f: Frame, off: int, size: int) -> list:
    cd = f.calldata
    return [cd[off + i] if off + i < len(cd) else _ZERO8 for i in range(size)]


def _op_calldataload(evm, state, ctx, f, info, args):
    off = _u(ctx, args[0], "CALLDATALOAD offset")
    parts = _calldata_slice(f, off, 32) if off < len(f.calldata) else [_ZERO8] * 32
    evm._commit(state, ctx, f, info, args, [_bytes_word(parts)])


def _op_calldatasize(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(len(f.calldata), 256)])


def _op_calldatacopy(evm, state, ctx, f, info, args):
    size = _size(ctx, args[2], "CALLDATACOPY size")
    dest = _offset(ctx, args[0], size, "CALLDATACOPY destination")
    src = _u(ctx, args[1], "CALLDATACOPY offset") if size else 0
    data = _calldata_slice(f, src, size) if src < len(f.calldata) else [_ZERO8] * size
    evm._commit(state, ctx, f, info, args, [])
    f.mem_write(dest, data)


def _op_codesize(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(len(f.code), 256)])


def _op_codecopy(evm, state, ctx, f, info, args):
    size = _size(ctx, args[2], "CODECOPY size")
    dest = _offset(ctx, args[0], size, "CODECOPY destination")
    src = _u(ctx, args[1], "CODECOPY offset") if size else 0
    code = f.code
    data = [E.bv(code[src + i], 8) if src + i < len(code) else _ZERO8 for i in range(size)]
    evm._commit(state, ctx, f, info, args, [])
    f.mem_write(dest, data)


def _op_returndatasize(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(len(f.returndata), 256)])


def _op_returndatacopy(evm, state, ctx, f, info, args):
    size = _size(ctx, args[2], "RETURNDATACOPY size")
    dest = _offset(ctx, args[0], size, "RETURNDATACOPY destination")
    src = _u(ctx, args[1], "RETURNDATACOPY offset") if size else 0
    if src + size > len(f.returndata):
        raise _Fail(INVALID_INSTRUCTION, "RETURNDATACOPY reads past the return data")
    evm._commit(state, ctx, f, info, args, [])
    f.mem_write(dest, f.returndata[src : src + size])


def _op_pop(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [])


def _op_mload(evm, state, ctx, f, info, args):
    off = _offset(ctx, args[0], 32, "MLOAD offset")
    evm._commit(state, ctx, f, info, args, [])
    value = _bytes_word(f.mem_read(off, 32))
    f.stack.append(value)
    state.publish("memory_read", E.bv(off, 256), 32, value)


def _op_mstore(evm, state, ctx, f, info, args):
    off = _offset(ctx, args[0], 32, "MSTORE offset")
    evm._commit(state, ctx, f, info, args, [])
    f.mem_write(off, _word_bytes(args[1]))
    state.publish("memory_write", E.bv(off, 256), 32, args[1])


def _op_mstore8(evm, state, ctx, f, info, args):
    off = _offset(ctx, args[0], 1, "MSTORE8 offset")
    evm._commit(state, ctx, f, info, args, [])
    b = args[1].extract(7, 0)
    f.mem_write(off, [b])
    state.publish("memory_write", E.bv(off, 256), 1, b)


def _op_sload(evm, state, ctx, f, info, args):
    acct = ctx.world.get(f.address)
    evm._commit(state, ctx, f, info, args, [E.select(acct.storage, args[0])])


def _op_sstore(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [])
    acct = ctx.world.get(f.address)
    acct.storage = E.store(acct.storage, args[0], args[1])


def _jump_target(ctx: EVMContext, f: Frame, dest: E.Expression) -> int:
    if not isinstance(dest, E.Constant) and dest not in ctx.pending:
        # split valid from invalid first so the capped enumeration only sees JUMPDESTs
        valid = E.or_(*[dest.eq(d) for d in sorted(f.jumpdests)])
        if not ctx.concretize(valid, ALL, "jump destination is a JUMPDEST"):
            raise _Fail(INVALID_INSTRUCTION, "jump to a destination that is not a JUMPDEST")
        policy = Policy("ALL", max(1, len(f.jumpdests)))
        raise Concretize(dest, policy, restrict=valid, message="jump destination")
    target = ctx.concretize(dest, None, "jump destination")
    if target not in f.jumpdests:
        raise _Fail(INVALID_INSTRUCTION, f"jump to {target:#x} which is not a JUMPDEST")
    return target


def _op_jump(evm, state, ctx, f, info, args):
    target = _jump_target(ctx, f, args[0])
    evm._commit(state, ctx, f, info, args, [], next_pc=target)


def _op_jumpi(evm, state, ctx, f, info, args):
    taken = ctx.concretize(E.not_(args[1].eq(0)), ALL, "branch condition")
    target = _jump_target(ctx, f, args[0]) if taken else None
    evm._commit(state, ctx, f, info, args, [], next_pc=target)


def _op_pc(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(f.pc, 256)])


def _op_msize(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [E.bv(f.msize, 256)])


def _op_gas(evm, state, ctx, f, info, args):
    # pushes the gas left after paying for GAS itself
    evm._commit(state, ctx, f, info, args, [E.bv(max(ctx.gas - info.gas, 0), 256)])


def _op_jumpdest(evm, state, ctx, f, info, args):
    evm._commit(state, ctx, f, info, args, [])


def _op_call(evm, state, ctx, f, info, args):
    _gas, to, value, in_off, in_size, out_off, out_size = args
    world = ctx.world
    to = to & ADDRESS_MASK
    if not isinstance(to, E.Constant) and to not in ctx.pending:
        known = sorted(world.accounts)
        raise Concretize(to, Policy("ALL", max(1, len(known))), restrict=E.or_(*[to.eq(a) for a in known]), message="call target")
    target = ctx.concretize(to, None, "call target")
    isize = _size(ctx, in_size, "CALL input size")
    ioff = _offset(ctx, in_off, isize, "CALL input offset")
    osize = _size(ctx, out_size, "CALL output size")
    ooff = _offset(ctx, out_off, osize, "CALL output offset")
    sender = world.get(f.address)
    enough = ctx.concretize(value.ule(sender.balance), ALL, "call value within balance")
    if len(ctx.frames) >= ops.MAX_CALL_DEPTH or not enough:
        evm._commit(state, ctx, f, info, args, [_ZERO])
        f.returndata = []
        if not enough:
            state.messages.append(f"call value exceeds balance of {f.address:#x}")
        return
    evm._charge(ctx, info.gas)
    calldata = f.mem_read(ioff, isize)
    f.touch(ooff, osize)
    del f.stack[-info.pops:]
    loc = (f.address, f.pc)
    snapshot = world.clone()
    callee = world.get(target)
    sender.balance = sender.balance - value
    callee.balance = callee.balance + value
    state.publish("did_execute_instruction", loc, info.mnemonic, args, [])
    if not callee.code:
        f.stack.append(_ONE)
        f.returndata = []
        f.pc += 1
        return
    ctx.frames.append(Frame(target, f.address, value, calldata, callee.code, snapshot, ooff, osize))


def _push_handler(evm, state, ctx, f, info, args):
    n = info.immediate
    raw = f.code[f.pc + 1 : f.pc + 1 + n].ljust(n, b"\0")
    evm._commit(state, ctx, f, info, args, [E.bv(int.from_bytes(raw, "big"), 256)])


def _dup_handler(evm, state, ctx, f, info, args):
    # args are top-first; DUPn copies the n-th item
    results = list(reversed(args)) + [args[-1]]
    evm._commit(state, ctx, f, info, args, results)


def _swap_handler(evm, state, ctx, f, info, args):
    items = list(reversed(args))  # bottom-first
    items[0], items[-1] = items[-1], items[0]
    evm._commit(state, ctx, f, info, args, items)


def _family_handler(mnemonic: str):
    if mnemonic.startswith("PUSH"):
        return _push_handler
    if mnemonic.startswith("DUP"):
        return _dup_handler
    if mnemonic.startswith("SWAP"):
        return _swap_handler
    raise AssertionError(mnemonic)


_HANDLERS = {
    "STOP": _op_stop,
    "ADD": _binary(lambda a, b: a + b),
    "MUL": _binary(lambda a, b: a * b),
    "SUB": _binary(lambda a, b: a - b),
    "DIV": _binary(_div),
    "SDIV": _binary(_sdiv),
    "MOD": _binary(_mod),
    "SMOD": _binary(_smod),
    "LT": _binary(lambda a, b: _flag(a.ult(b))),
    "GT": _binary(lambda a, b: _flag(a.ugt(b))),
    "SLT": _binary(lambda a, b: _flag(a.slt(b))),
    "SGT": _binary(lambda a, b: _flag(a.sgt(b))),
    "EQ": _binary(lambda a, b: _flag(a.eq(b))),
    "ISZERO": _unary(lambda a: _flag(a.eq(0))),
    "AND": _binary(lambda a, b: a & b),
    "OR": _binary(lambda a, b: a | b),
    "XOR": _binary(lambda a, b: a ^ b),
    "NOT": _unary(lambda a: ~a),
    "BYTE": _binary(_byte),
    "SHL": _binary(lambda shift, v: v << shift),
    "SHR": _binary(lambda shift, v: v >> shift),
    "SAR": _binary(lambda shift, v: v.ashr(shift)),
    "SHA3": _op_sha3,
    "ADDRESS": _op_address,
    "BALANCE": _op_balance,
    "CALLER": _op_caller,
    "CALLVALUE": _op_callvalue,
    "CALLDATALOAD": _op_calldataload,
    "CALLDATASIZE": _op_calldatasize,
    "CALLDATACOPY": _op_calldatacopy,
    "CODESIZE": _op_codesize,
    "CODECOPY": _op_codecopy,
    "RETURNDATASIZE": _op_returndatasize,
    "RETURNDATACOPY": _op_returndatacopy,
    "POP": _op_pop,
    "MLOAD": _op_mload,
    "MSTORE": _op_mstore,
    "MSTORE8": _op_mstore8,
    "SLOAD": _op_sload,
    "SSTORE": _op_sstore,
    "JUMP": _op_jump,
    "JUMPI": _op_jumpi,
    "PC": _op_pc,
    "MSIZE": _op_msize,
    "GAS": _op_gas,
    "JUMPDEST": _op_jumpdest,
    "CALL": _op_call,
    "RETURN": _op_return,
    "REVERT": _op_revert,
}
