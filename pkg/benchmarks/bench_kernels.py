"""Compare the compiled kernels with their pure-Python fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Measures keccak256 over a few message sizes and a concrete MiniVM run
(the replay kernel) on a counting loop.  Results from both backends are
checked for equality before timing.
"""

import argparse
import os
import sys
import timeit

from mcore.evm import keccak as py_keccak
from mcore.native import concrete as py_concrete
from mcore.native.asm import assemble

try:
    from mcore import _speedups
except ImportError:
    _speedups = None

LOOP = """
    LOADI R0, 0
    LOADI R1, {n}
    LOADI R2, 1
loop:
    ADD R0, R0, R2
    SUB R3, R1, R0
    JNZ R3, loop
    LOADI R1, 0
    LOADI R0, 0
    SYSCALL
"""


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--loop", type=int, default=100_000, help="iterations of the MiniVM loop")
    args = ap.parse_args(argv)
    if _speedups is None:
        print("compiled extension not built; only the pure-Python backend is available")
        return 1

    rows = []
    for size in (0, 136, 4096, 65536):
        msg = os.urandom(size)
        assert _speedups.keccak256(msg) == py_keccak.keccak256(msg)
        t_py = _time(lambda: py_keccak.keccak256(msg), args.repeat)
        t_cy = _time(lambda: _speedups.keccak256(msg), args.repeat)
        rows.append((f"keccak256 {size} B", t_py, t_cy))

    image = assemble(LOOP.format(n=args.loop))
    assert _speedups.run_concrete(image, b"") == py_concrete.run_concrete(image, b"")
    t_py = _time(lambda: py_concrete.run_concrete(image, b""), max(1, args.repeat // 2))
    t_cy = _time(lambda: _speedups.run_concrete(image, b""), args.repeat)
    rows.append((f"run_concrete {3 * args.loop + 6} insns", t_py, t_cy))

    print(f"{'kernel':<28} {'python s':>12} {'cython s':>12} {'speedup':>9}")
    for name, a, b in rows:
        print(f"{name:<28} {a:12.6f} {b:12.6f} {a / b:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
