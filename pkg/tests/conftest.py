import numpy as np
import pytest

from qfcert.rngstreams import stream
from qfcert.spectral import SymmetricOperator


def random_symmetric(n: int, seed: int, normalized: bool = False) -> SymmetricOperator:
    g = stream(seed, "test-matrix", n)
    a = g.standard_normal((n, n))
    a = (a + a.T) / 2.0
    if normalized:
        a = a / np.sqrt(np.sum(a**2))
    return SymmetricOperator(a)


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    g = stream(seed, "orthogonal", n)
    q, r = np.linalg.qr(g.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return stream(20250810, "fixture")
