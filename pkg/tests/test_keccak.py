import os
import random

import pytest
from Crypto.Hash import keccak as reference

from mcore import kernels
from mcore.evm import keccak as py_keccak

try:
    from mcore import _speedups
except ImportError:
    _speedups = None

BACKENDS = [pytest.param(py_keccak.keccak256, id="python")]
if _speedups is not None:
    BACKENDS.append(pytest.param(_speedups.keccak256, id="cython"))


def ref(data: bytes) -> bytes:
    return reference.new(digest_bits=256, data=data).digest()


@pytest.mark.parametrize("keccak256", BACKENDS)
def test_known_vectors(keccak256):
    assert keccak256(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
    assert keccak256(b"abc").hex() == "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"
    assert ref(b"").hex() == keccak256(b"").hex()


@pytest.mark.parametrize("keccak256", BACKENDS)
def test_random_inputs_match_reference(keccak256):
    rng = random.Random(1234)
    for _ in range(100):
        data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 600)))
        assert keccak256(data) == ref(data)


@pytest.mark.parametrize("keccak256", BACKENDS)
def test_rate_boundaries(keccak256):
    for n in (135, 136, 137, 271, 272, 273):
        data = os.urandom(n)
        assert keccak256(data) == ref(data)


def test_permutation_backends_agree():
    if _speedups is None:
        pytest.skip("extension not built")
    rng = random.Random(7)
    for _ in range(20):
        lanes = [rng.getrandbits(64) for _ in range(25)]
        assert list(_speedups.keccak_f1600(list(lanes))) == list(py_keccak.keccak_f1600(list(lanes)))


def test_selected_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.keccak256(b"abc") == ref(b"abc")
