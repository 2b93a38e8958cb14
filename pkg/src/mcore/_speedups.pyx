# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Keccak-256 and the concrete MiniVM interpreter.

Behaviour matches ``mcore.evm.keccak`` and ``mcore.native.concrete``
exactly; the pure-Python versions are the reference.
"""

from libc.stdint cimport uint8_t, uint32_t, uint64_t
from libc.string cimport memcpy, memset

cdef uint64_t RC[24]
cdef int ROT[25]
cdef int PI_DST[25]


def _init_tables():
    from mcore.evm.keccak import PI, RC as _RC, ROT as _ROT
    cdef int i
    for i in range(24):
        RC[i] = _RC[i]
    for i in range(25):
        ROT[i] = _ROT[i]
        PI_DST[i] = PI[i]


_init_tables()


cdef inline uint64_t rotl(uint64_t v, int r) nogil:
    if r == 0:
        return v
    return (v << r) | (v >> (64 - r))


cdef void f1600(uint64_t* a) nogil:
    cdef uint64_t c[5]
    cdef uint64_t d[5]
    cdef uint64_t b[25]
    cdef int rnd, x, y, i
    for rnd in range(24):
        for x in range(5):
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20]
        for x in range(5):
            d[x] = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1)
        for i in range(25):
            a[i] ^= d[i % 5]
        for i in range(25):
            b[PI_DST[i]] = rotl(a[i], ROT[i])
        for y in range(0, 25, 5):
            for x in range(5):
                a[y + x] = b[y + x] ^ ((~b[y + (x + 1) % 5]) & b[y + (x + 2) % 5])
        a[0] ^= RC[rnd]


def keccak_f1600(lanes):
    cdef uint64_t a[25]
    cdef int i
    for i in range(25):
        a[i] = lanes[i]
    f1600(a)
    return [a[i] for i in range(25)]


def keccak256(data):
    cdef bytes buf = bytes(data)
    cdef const uint8_t* p = buf
    cdef Py_ssize_t n = len(buf)
    cdef Py_ssize_t off = 0
    cdef uint64_t a[25]
    cdef uint8_t block[136]
    cdef int i, j
    cdef uint64_t lane
    memset(a, 0, sizeof(a))
    while True:
        if n - off >= 136:
            memcpy(block, p + off, 136)
            off += 136
            last = False
        else:
            memset(block, 0, 136)
            memcpy(block, p + off, n - off)
            block[n - off] = 0x01
            block[135] |= 0x80
            last = True
        for i in range(17):
            lane = 0
            for j in range(8):
                lane |= (<uint64_t>block[8 * i + j]) << (8 * j)
            a[i] ^= lane
        f1600(a)
        if last:
            break
    out = bytearray(32)
    for i in range(4):
        for j in range(8):
            out[8 * i + j] = (a[i] >> (8 * j)) & 0xFF
    return bytes(out)


cdef enum:
    CODE_BASE = 0x1000
    ARGV_BASE = 0x10000
    ARGV_SIZE = 0x10000
    DATA_BASE = 0x20000
    DATA_SIZE = 0x10000


cdef inline bint in_range(uint64_t addr, uint64_t size, uint64_t base, uint64_t end) nogil:
    return base <= addr and addr + size <= end


def run_concrete(image, stdin, argv_blob=b"", long long max_steps=10000000):
    """See :func:`mcore.native.concrete.run_concrete`."""
    cdef bytes code = bytes(image)
    cdef bytes inp = bytes(stdin)
    cdef bytearray argv = bytearray(argv_blob)
    cdef bint has_argv = len(argv) > 0
    if has_argv:
        argv.extend(bytes(ARGV_SIZE - len(argv)))
    cdef const uint8_t* cp = code
    cdef const uint8_t* ip = inp
    cdef uint8_t* ap = argv
    cdef bytearray data = bytearray(DATA_SIZE)
    cdef uint8_t* dp = data
    cdef uint64_t code_end = CODE_BASE + len(code)
    cdef Py_ssize_t in_len = len(inp)
    cdef Py_ssize_t cursor = 0
    cdef uint32_t regs[8]
    cdef uint32_t pc = CODE_BASE, nxt, a, b, imm, addr, n, length, fd
    cdef uint8_t op, rd, rs1, rs2
    cdef const uint8_t* src
    cdef long long steps = 0
    cdef Py_ssize_t off
    cdef int k
    trace = []
    stdout = bytearray()
    for k in range(8):
        regs[k] = 0
    while True:
        if steps >= max_steps:
            return "StepLimit", None, trace, bytes(stdout)
        steps += 1
        trace.append(pc)
        if not in_range(pc, 8, CODE_BASE, code_end):
            return "MemoryViolation", pc, trace, bytes(stdout)
        off = pc - CODE_BASE
        op = cp[off]
        rd = cp[off + 1]
        rs1 = cp[off + 2]
        rs2 = cp[off + 3]
        imm = (<uint32_t>cp[off + 4]) | (<uint32_t>cp[off + 5] << 8) | (<uint32_t>cp[off + 6] << 16) | (<uint32_t>cp[off + 7] << 24)
        if op > 0x11 or rd > 7 or rs1 > 7 or rs2 > 7:
            return "InvalidInstruction", None, trace, bytes(stdout)
        nxt = pc + 8
        a = regs[rs1]
        b = regs[rs2]
        if op == 0x00:
            return "Exit", 0, trace, bytes(stdout)
        elif op == 0x01:
            regs[rd] = imm
        elif op == 0x02:
            regs[rd] = a
        elif op == 0x03:
            regs[rd] = a + b
        elif op == 0x04:
            regs[rd] = a - b
        elif op == 0x05:
            regs[rd] = a * b
        elif op == 0x06:
            regs[rd] = a ^ b
        elif op == 0x07:
            regs[rd] = a & b
        elif op == 0x08:
            regs[rd] = a | b
        elif op == 0x09:
            regs[rd] = a << (b & 31)
        elif op == 0x0A:
            regs[rd] = a >> (b & 31)
        elif op == 0x0B:
            addr = a + imm
            if in_range(addr, 4, CODE_BASE, code_end):
                src = cp + (addr - CODE_BASE)
            elif has_argv and in_range(addr, 4, ARGV_BASE, ARGV_BASE + ARGV_SIZE):
                src = ap + (addr - ARGV_BASE)
            elif in_range(addr, 4, DATA_BASE, DATA_BASE + DATA_SIZE):
                src = dp + (addr - DATA_BASE)
            else:
                return "MemoryViolation", addr, trace, bytes(stdout)
            regs[rd] = (<uint32_t>src[0]) | (<uint32_t>src[1] << 8) | (<uint32_t>src[2] << 16) | (<uint32_t>src[3] << 24)
        elif op == 0x0C:
            addr = a + imm
            if not in_range(addr, 4, DATA_BASE, DATA_BASE + DATA_SIZE):
                return "MemoryViolation", addr, trace, bytes(stdout)
            off = addr - DATA_BASE
            dp[off] = b & 0xFF
            dp[off + 1] = (b >> 8) & 0xFF
            dp[off + 2] = (b >> 16) & 0xFF
            dp[off + 3] = (b >> 24) & 0xFF
        elif op == 0x0D:
            nxt = imm
        elif op == 0x0E:
            if a == 0:
                nxt = imm
        elif op == 0x0F:
            if a != 0:
                nxt = imm
        elif op == 0x10:
            regs[rd] = 1 if a < b else 0
        else:
            if regs[0] == 0:
                return "Exit", regs[1], trace, bytes(stdout)
            elif regs[0] == 1:
                fd = regs[1]
                addr = regs[2]
                length = regs[3]
                if fd != 0:
                    regs[0] = 0xFFFFFFFF
                else:
                    n = length
                    if <Py_ssize_t>n > in_len - cursor:
                        n = in_len - cursor
                    if n > 0:
                        if not in_range(addr, n, DATA_BASE, DATA_BASE + DATA_SIZE):
                            return "MemoryViolation", addr, trace, bytes(stdout)
                        memcpy(dp + (addr - DATA_BASE), ip + cursor, n)
                        cursor += n
                    regs[0] = n
            elif regs[0] == 2:
                fd = regs[1]
                addr = regs[2]
                length = regs[3]
                if fd != 1:
                    regs[0] = 0xFFFFFFFF
                else:
                    if length > 0:
                        if in_range(addr, length, CODE_BASE, code_end):
                            stdout += code[addr - CODE_BASE : addr - CODE_BASE + length]
                        elif has_argv and in_range(addr, length, ARGV_BASE, ARGV_BASE + ARGV_SIZE):
                            stdout += argv[addr - ARGV_BASE : addr - ARGV_BASE + length]
                        elif in_range(addr, length, DATA_BASE, DATA_BASE + DATA_SIZE):
                            stdout += data[addr - DATA_BASE : addr - DATA_BASE + length]
                        else:
                            return "MemoryViolation", addr, trace, bytes(stdout)
                    regs[0] = length
            else:
                return "InvalidInstruction", None, trace, bytes(stdout)
        pc = nxt
