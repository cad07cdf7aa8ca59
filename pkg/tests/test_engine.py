import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eie.compress import Codebook, QuantizedSparseMatrix, dequantize_raw
from eie.csc import encode, encode_interleaved
from eie.engine import accumulate, count_work, run_network, spmv_compressed, spmv_dense_oracle
from eie.errors import AccumulatorOverflowError
from eie.fixedpoint import ActivationVector, FixedPointFormat, quantize_activations

from conftest import random_acts, random_q


def test_zero_input_gives_zero(rng):
    q = random_q(rng, 20, 30, 0.2)
    e = encode_interleaved(q, 4)
    out = spmv_compressed(e, q.codebook, ActivationVector(np.zeros(30, np.int16)))
    assert not out.raw.any()


def test_one_by_one():
    cb = Codebook.from_values([0.5] * 15)
    q = QuantizedSparseMatrix(1, 1, [0], [0], [1], cb)
    a = quantize_activations([0.5])
    out = spmv_compressed(encode_interleaved(q, 1), cb, a)
    assert out.values.tolist() == [0.25]
    assert spmv_dense_oracle(dequantize_raw(q), a) == out


def test_identity_is_relu():
    cb = Codebook.from_values([1.0] * 15)
    n = 12
    q = QuantizedSparseMatrix(n, n, np.arange(n), np.arange(n), np.ones(n), cb)
    a = quantize_activations(np.linspace(-3, 3, n))
    out = spmv_compressed(encode_interleaved(q, 3), cb, a, apply_relu=True)
    assert np.array_equal(out.raw, np.maximum(a.raw, 0))


def test_only_touched_rows_update():
    idx = np.zeros((16, 8), np.uint8)
    idx[0, 2], idx[12, 2], idx[5, 3] = 1, 2, 3
    cb = Codebook.from_values(np.linspace(0.5, 2, 15))
    q = QuantizedSparseMatrix.from_dense_indices(idx, cb)
    raw = np.zeros(8, np.int16)
    raw[2] = 256
    out = spmv_compressed(encode_interleaved(q, 4), cb, ActivationVector(raw))
    assert set(np.flatnonzero(out.raw).tolist()) == {0, 12}


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(0.02, 0.5), st.sampled_from([1, 2, 3, 4, 8]),
       st.booleans(), st.integers(0, 2**32 - 1))
def test_oracle_equivalence(rows, cols, d, n_pe, use_relu, seed):
    rng = np.random.default_rng(seed)
    q = random_q(rng, rows, cols, d)
    a = random_acts(rng, cols, 0.6, -2000, 2000)
    got = spmv_compressed(encode_interleaved(q, n_pe), q.codebook, a, apply_relu=use_relu)
    want = spmv_dense_oracle(dequantize_raw(q), a, apply_relu=use_relu)
    assert got == want
    if use_relu:
        assert (got.raw >= 0).all()


def test_tiled_matches_flat(rng):
    q = random_q(rng, 30, 70, 0.2)
    a = random_acts(rng, 70)
    assert spmv_compressed(encode(q, 4, 16), q.codebook, a) == spmv_compressed(encode(q, 4), q.codebook, a)


def test_linearity_of_accumulator(rng):
    q = random_q(rng, 25, 25, 0.3)
    a = random_acts(rng, 25, 0.5, -1000, 1000)
    a2 = ActivationVector((a.raw.astype(np.int32) * 2).astype(np.int16))
    e = encode_interleaved(q, 4)
    assert np.array_equal(accumulate(e, q.codebook, a2), 2 * accumulate(e, q.codebook, a))


def test_dynamic_sparsity_law(rng):
    q = random_q(rng, 40, 30, 0.15)
    e = encode_interleaved(q, 4)
    a = random_acts(rng, 30, 0.8)
    base = spmv_compressed(e, q.codebook, a)
    j = int(a.nonzero()[0])
    raw = a.raw.copy()
    raw[j] = 0
    changed = spmv_compressed(e, q.codebook, ActivationVector(raw))
    untouched = np.ones(40, bool)
    untouched[q.row[q.col == j]] = False
    assert np.array_equal(base.raw[untouched], changed.raw[untouched])


def test_count_work(rng):
    q = random_q(rng, 100, 20, 0.05)
    e = encode_interleaved(q, 2)
    a = random_acts(rng, 20, 0.5)
    w = count_work(e, a)
    active = a.raw != 0
    assert w.useful == int(active[q.col].sum())
    assert w.macs >= w.useful


def test_mismatches_raise(rng):
    q = random_q(rng, 5, 5, 0.5)
    e = encode_interleaved(q, 1)
    with pytest.raises(ValueError):
        spmv_compressed(e, q.codebook, ActivationVector(np.zeros(4, np.int16)))
    with pytest.raises(ValueError):
        spmv_compressed(e, q.codebook, ActivationVector(np.zeros(5, np.int16), FixedPointFormat(4)))
    with pytest.raises(ValueError):
        spmv_dense_oracle(np.zeros((5, 4)), ActivationVector(np.zeros(5, np.int16)))


def test_overflow_precondition():
    n = 1 << 20
    w = np.full((1, n), 1 << 40, dtype=np.int64)
    a = ActivationVector(np.full(n, 32767, np.int16))
    with pytest.raises(AccumulatorOverflowError):
        spmv_dense_oracle(w, a)


def test_run_network(rng):
    q1 = random_q(rng, 20, 30, 0.3)
    q2 = random_q(rng, 10, 20, 0.3)
    q3 = random_q(rng, 5, 10, 0.3)
    a = random_acts(rng, 30, 0.7)
    layers = [(encode_interleaved(q, 4), q.codebook) for q in (q1, q2, q3)]
    assert run_network(layers[:1], a) == spmv_compressed(layers[0][0], q1.codebook, a)
    h = spmv_dense_oracle(dequantize_raw(q1), a, apply_relu=True)
    h = spmv_dense_oracle(dequantize_raw(q2), h, apply_relu=True)
    want = spmv_dense_oracle(dequantize_raw(q3), h)
    assert run_network(layers, a) == want
    # identity second layer
    eye = Codebook.from_values([1.0] * 15)
    qi = QuantizedSparseMatrix(20, 20, np.arange(20), np.arange(20), np.ones(20), eye)
    two = run_network([layers[0], (encode_interleaved(qi, 2), eye)], a)
    first = spmv_compressed(layers[0][0], q1.codebook, a, apply_relu=True)
    assert two == first
    with pytest.raises(ValueError):
        run_network([layers[0], layers[2]], a)
    with pytest.raises(ValueError):
        run_network([], a)
