import numpy as np
import pytest

from eie.compress import Codebook, QuantizedSparseMatrix
from eie.fixedpoint import ActivationVector, Q8_8


def random_codebook(rng, fmt=Q8_8):
    return Codebook.from_values(np.sort(rng.uniform(-2.0, 2.0, 15)), fmt)


def random_q(rng, rows, cols, density, cb=None):
    cb = cb or random_codebook(rng)
    mask = rng.random((rows, cols)) < density
    idx = np.where(mask, rng.integers(1, 16, size=(rows, cols)), 0)
    return QuantizedSparseMatrix.from_dense_indices(idx, cb)


def random_acts(rng, n, density=0.5, lo=-512, hi=512, fmt=Q8_8):
    raw = rng.integers(lo, hi + 1, size=n)
    raw[rng.random(n) >= density] = 0
    return ActivationVector(raw.astype(np.int16), fmt)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
