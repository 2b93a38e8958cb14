"""Keccak-256 (the pre-standard SHA-3 padding used by the EVM), pure Python.

State is 25 little-endian 64-bit lanes indexed ``x + 5*y``.  Round
constants and rotation offsets are generated from their defining LFSR and
(x, y) walk instead of being tabulated.
"""

from __future__ import annotations

M64 = (1 << 64) - 1
RATE = 136  # bytes: 1600 - 2*256 bits
ROUNDS = 24


def _round_constants():
    # rc(t) from the degree-8 LFSR x^8 + x^6 + x^5 + x^4 + 1
    def rc(t):
        if t % 255 == 0:
            return 1
        r = 1
        for _ in range(t % 255):
            r <<= 1
            if r & 0x100:
                r ^= 0x171
        return r & 1

    out = []
    for i in range(ROUNDS):
        c = 0
        for j in range(7):
            if rc(j + 7 * i):
                c |= 1 << ((1 << j) - 1)
        out.append(c)
    return tuple(out)


def _rotations():
    rot = [0] * 25
    x, y = 1, 0
    for t in range(24):
        rot[x + 5 * y] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    return tuple(rot)


RC = _round_constants()
ROT = _rotations()
# destination lane of pi for each source lane
PI = tuple(y + 5 * ((2 * x + 3 * y) % 5) for y in range(5) for x in range(5))
_PI_SRC = tuple(x + 5 * y for y in range(5) for x in range(5))


def keccak_f1600(lanes: list) -> list:
    """Apply the 24-round permutation to 25 lanes (returns a new list)."""
    a = list(lanes)
    for rnd in range(ROUNDS):
        c = [a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20] for x in range(5)]
        d = [c[(x - 1) % 5] ^ (((c[(x + 1) % 5] << 1) | (c[(x + 1) % 5] >> 63)) & M64) for x in range(5)]
        for i in range(25):
            a[i] ^= d[i % 5]
        b = [0] * 25
        for src, dst in zip(_PI_SRC, PI):
            v = a[src]
            r = ROT[src]
            b[dst] = ((v << r) | (v >> (64 - r))) & M64 if r else v
        for y in range(0, 25, 5):
            row = b[y : y + 5]
            for x in range(5):
                a[y + x] = row[x] ^ ((~row[(x + 1) % 5]) & row[(x + 2) % 5])
        a[0] ^= RC[rnd]
    return a


def keccak256(data: bytes) -> bytes:
    data = bytes(data)
    padded = bytearray(data)
    padded.append(0x01)
    padded += bytes(-len(padded) % RATE)
    padded[-1] |= 0x80
    lanes = [0] * 25
    for off in range(0, len(padded), RATE):
        block = padded[off : off + RATE]
        for i in range(RATE // 8):
            lanes[i] ^= int.from_bytes(block[8 * i : 8 * i + 8], "little")
        lanes = keccak_f1600(lanes)
    return b"".join(lanes[i].to_bytes(8, "little") for i in range(4))
