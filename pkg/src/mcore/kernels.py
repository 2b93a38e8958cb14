"""Hot kernels, compiled when the extension is available.

``BACKEND`` is ``"cython"`` or ``"python"``.  Setting the environment
variable ``MCORE_PURE_PYTHON=1`` forces the pure-Python versions.
"""

from __future__ import annotations

import os

from mcore.evm import keccak as _py_keccak
from mcore.native import concrete as _py_concrete

BACKEND = "python"
keccak256 = _py_keccak.keccak256
keccak_f1600 = _py_keccak.keccak_f1600
run_concrete = _py_concrete.run_concrete

if os.environ.get("MCORE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from mcore import _speedups
    except ImportError:
        _speedups = None
    if _speedups is not None:
        keccak256 = _speedups.keccak256
        keccak_f1600 = _speedups.keccak_f1600
        run_concrete = _speedups.run_concrete
        BACKEND = "cython"
