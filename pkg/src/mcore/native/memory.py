"""Mapped address space with byte-granular symbolic contents.

Each region's contents are an ``Array(32 -> 8)`` expression.  Writes to
concrete addresses are kept in a per-region cell dictionary layered on
top of the array and folded into it (as STORE nodes) the first time a
symbolic address touches the region; reads see exactly the same values
either way.
"""

from __future__ import annotations

from typing import List, Optional

from mcore.core.events import MEMORY_VIOLATION, AbandonState, Terminate, TerminationReason
from mcore.smt import expression as E

FULLY_SYMBOLIC = "fully-symbolic"
CONCRETIZING = "concretizing"
MODELS = (FULLY_SYMBOLIC, CONCRETIZING)

_MASK = 0xFFFFFFFF


def violation(addr: int) -> Terminate:
    return Terminate(TerminationReason(MEMORY_VIOLATION, addr & _MASK))


class Region:
    __slots__ = ("base", "size", "perms", "name", "backing", "cells", "image")

    def __init__(self, base: int, size: int, perms: str, name: str = "", init=b""):
        self.base = base
        self.size = size
        self.perms = perms
        self.name = name
        self.backing = E.ConstArray(32, 8)
        # concrete address -> Expression(8); init bytes start out here
        self.cells = {}
        for i, b in enumerate(init):
            self.cells[base + i] = b if isinstance(b, E.Expression) else E.bv(b, 8)
        self.image = bytes(b if isinstance(b, int) else 0 for b in init)

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int, size: int = 1) -> bool:
        return self.base <= addr and addr + size <= self.end

    def copy(self) -> "Region":
        r = Region.__new__(Region)
        r.base, r.size, r.perms, r.name = self.base, self.size, self.perms, self.name
        r.backing = self.backing
        r.cells = dict(self.cells)
        r.image = self.image
        return r

    def fold(self) -> E.Expression:
        """Move concrete-address cells into the backing array."""
        if self.cells:
            arr = self.backing
            for addr in sorted(self.cells):
                arr = E.store(arr, E.bv(addr, 32), self.cells[addr])
            self.backing = arr
            self.cells = {}
        return self.backing

    def get(self, addr: int) -> E.Expression:
        cell = self.cells.get(addr)
        if cell is not None:
            return cell
        return E.select(self.backing, E.bv(addr, 32))

    def put(self, addr: int, value: E.Expression) -> None:
        self.cells[addr] = value

    def guard(self, addr: E.Expression, size: int) -> E.Expression:
        """Bool: the whole ``size``-byte access at ``addr`` lies inside this region."""
        return E.and_(addr.uge(self.base), addr.ule(self.end - size))

    def __repr__(self):
        return f"<Region {self.name} {self.base:#x}-{self.end:#x} {self.perms}>"


class MemoryMap:
    def __init__(self, model: str = CONCRETIZING):
        if model not in MODELS:
            raise ValueError(f"unknown memory model {model!r}; expected one of {MODELS}")
        self.model = model
        self.regions: List[Region] = []

    def clone(self) -> "MemoryMap":
        m = MemoryMap.__new__(MemoryMap)
        m.model = self.model
        m.regions = [r.copy() for r in self.regions]
        return m

    def map(self, base: int, size: int, perms: str, name: str = "", init=b"") -> Region:
        if size <= 0 or base < 0 or base + size > 1 << 32:
            raise ValueError("region outside the 32-bit address space")
        for r in self.regions:
            if base < r.end and r.base < base + size:
                raise ValueError(f"region {name} overlaps {r}")
        if len(init) > size:
            raise ValueError(f"initial contents larger than region {name}")
        region = Region(base, size, perms, name, init)
        self.regions.append(region)
        return region

    def find(self, addr: int, size: int = 1, perm: Optional[str] = None) -> Optional[Region]:
        for r in self.regions:
            if r.contains(addr, size) and (perm is None or perm in r.perms):
                return r
        return None

    # -- concrete-address access ---------------------------------------------------
    def _region_for(self, addr: int, size: int, perm: str) -> Region:
        r = self.find(addr, size, perm)
        if r is None:
            raise violation(addr)
        return r

    def read_bytes(self, addr: int, size: int) -> list:
        r = self._region_for(addr, size, "r")
        return [r.get(addr + i) for i in range(size)]

    def write_bytes(self, addr: int, values: list) -> None:
        r = self._region_for(addr, len(values), "w")
        for i, v in enumerate(values):
            r.put(addr + i, v)

    def fetch(self, addr: int, size: int) -> bytes:
        """Concrete instruction bytes from an executable region."""
        r = self.find(addr, size, "x")
        if r is None:
            raise violation(addr)
        off = addr - r.base
        if off + size <= len(r.image):
            return r.image[off : off + size]
        out = bytearray()
        for i in range(size):
            v = r.get(addr + i)
            out.append(v.value if isinstance(v, E.Constant) else 0)
        return bytes(out)

    # -- expression-address access --------------------------------------------------
    def read(self, state, addr: E.Expression, size: int) -> E.Expression:
        """Little-endian ``size``-byte load; fires ``memory_read``."""
        value = E.concat(*reversed(self._read_list(state, addr, size)))
        state.publish("memory_read", addr, size, value)
        return value

    def write(self, state, addr: E.Expression, value: E.Expression, size: int) -> None:
        parts = [value.extract(8 * i + 7, 8 * i) for i in range(size)]
        self._write_list(state, addr, parts)
        state.publish("memory_write", addr, size, value)

    def _read_list(self, state, addr: E.Expression, size: int) -> list:
        if isinstance(addr, E.Constant):
            return self.read_bytes(addr.value, size)
        if self.model == CONCRETIZING:
            return self.read_bytes(state.context.concretize(addr, message="symbolic read address"), size)
        regions = self._guard(state, addr, size, "r")
        out = []
        for i in range(size):
            a = addr + i
            val = None
            for r, g in reversed(regions):
                sel = E.select(r.fold(), a)
                val = sel if val is None else E.ite(g, sel, val)
            out.append(val)
        return out

    def _write_list(self, state, addr: E.Expression, parts: list) -> None:
        size = len(parts)
        if isinstance(addr, E.Constant):
            self.write_bytes(addr.value, parts)
            return
        if self.model == CONCRETIZING:
            self.write_bytes(state.context.concretize(addr, message="symbolic write address"), parts)
            return
        regions = self._guard(state, addr, size, "w")
        for r, g in regions:
            arr = r.fold()
            for i, v in enumerate(parts):
                a = addr + i
                arr = E.store(arr, a, E.ite(g, v, E.select(arr, a)))
            r.backing = arr

    def _guard(self, state, addr: E.Expression, size: int, perm: str) -> list:
        """Constrain a symbolic access to the regions granting ``perm``."""
        regions = [(r, r.guard(addr, size)) for r in self.regions if perm in r.perms and r.size >= size]
        guard = E.or_(*[g for _, g in regions]) if regions else E.FALSE
        if not state.can_be_true(guard):
            state.messages.append(f"symbolic {'read' if perm == 'r' else 'write'} address has no mapped value")
            raise AbandonState()
        state.constrain(guard)
        return regions

