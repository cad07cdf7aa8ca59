import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eie.compress import Codebook, QuantizedSparseMatrix
from eie.csc import (
    InterleavedCsc, PeSlice, TiledCsc, column_counts, decode, decode_interleaved, encode, encode_interleaved,
    encode_tiled, padding_stats, validate,
)
from eie.errors import CapacityError, FormatError

from conftest import random_q

CB = Codebook.from_values(np.linspace(-1, 1, 15))


def golden_column():
    # 23 rows: [0,0,1,2, 15 zeros, 0,0,0,3]
    col = np.zeros(23, dtype=np.uint8)
    col[2], col[3], col[22] = 1, 2, 3
    return QuantizedSparseMatrix.from_dense_indices(col[:, None], CB)


def test_golden_column():
    e = encode_interleaved(golden_column(), 1)
    s = e.slices[0]
    assert s.v.tolist() == [1, 2, 0, 3]
    assert s.z.tolist() == [2, 0, 15, 2]
    assert s.p.tolist() == [0, 4]
    assert padding_stats(e) == ([1], 1)
    assert validate(e) == []


def fig2_matrix():
    # 16 x 8 example layout on 4 PEs; column 2 has entries at rows 0 and 12 on PE0
    idx = np.zeros((16, 8), dtype=np.uint8)
    idx[0, 0] = 1
    idx[0, 2] = 2
    idx[12, 2] = 3
    idx[5, 2] = 4
    idx[9, 7] = 5
    idx[14, 4] = 6
    return QuantizedSparseMatrix.from_dense_indices(idx, CB)


def test_fig2_interleaving():
    e = encode_interleaved(fig2_matrix(), 4)
    v, z = e.slices[0].column(2)
    assert v.tolist() == [2, 3]
    assert z.tolist() == [0, 2]
    v1, z1 = e.slices[1].column(2)
    assert v1.tolist() == [4] and z1.tolist() == [1]  # row 5 -> local row 1 of PE1


def test_all_zero_column_has_no_entries():
    e = encode_interleaved(fig2_matrix(), 4)
    for s in e.slices:
        assert s.p[4] - s.p[3] == 0  # column 3 is empty everywhere


def test_zero_count_resets_per_column():
    idx = np.zeros((20, 2), dtype=np.uint8)
    idx[19, 0] = 1
    idx[0, 1] = 2
    e = encode_interleaved(QuantizedSparseMatrix.from_dense_indices(idx, CB), 1)
    assert e.slices[0].z.tolist() == [15, 3, 0]
    assert e.slices[0].v.tolist() == [0, 1, 2]


def test_exact_sixteen_gap():
    # 16 zeros then a kept entry: one padding with z=15 that itself covers a zero row, then z=0
    idx = np.zeros((17, 1), dtype=np.uint8)
    idx[16, 0] = 7
    s = encode_interleaved(QuantizedSparseMatrix.from_dense_indices(idx, CB), 1).slices[0]
    assert s.v.tolist() == [0, 7] and s.z.tolist() == [15, 0]


def test_empty_and_dense():
    empty = QuantizedSparseMatrix(8, 5, [], [], [], CB)
    e = encode_interleaved(empty, 2)
    assert padding_stats(e)[1] == 0 and decode(e).nnz == 0
    dense = QuantizedSparseMatrix.from_dense_indices(np.full((40, 6), 3, dtype=np.uint8), CB)
    assert padding_stats(encode_interleaved(dense, 3))[1] == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.floats(0.04, 0.25), st.sampled_from([1, 2, 4, 8, 16]), st.integers(0, 2**32 - 1))
def test_round_trip_property(rows, cols, d, n_pe, seed):
    q = random_q(np.random.default_rng(seed), rows, cols, d, CB)
    e = encode_interleaved(q, n_pe)
    assert validate(e) == []
    assert decode_interleaved(e) == q
    kept = sum(int(np.count_nonzero(s.v)) for s in e.slices)
    assert kept == q.nnz
    # pointer law
    counts = column_counts(e)
    assert counts.sum() == e.n_entries


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(1, 30), st.floats(0.01, 0.3), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_no_padding_for_short_slices(rows, cols, d, n_pe, seed):
    q = random_q(np.random.default_rng(seed), rows, cols, d, CB)
    e = encode_interleaved(q, n_pe)
    if -(-rows // n_pe) <= 16:
        assert padding_stats(e)[1] == 0


def test_padding_stats_matches_gap_formula(rng):
    q = random_q(rng, 300, 20, 0.02, CB)
    e = encode_interleaved(q, 2)
    want = 0
    for k in range(2):
        for j in range(q.cols):
            lr = np.sort(q.row[(q.col == j) & (q.row % 2 == k)] // 2)
            prev = -1
            for r in lr:
                want += (r - prev - 1) // 16
                prev = r
    assert padding_stats(e)[1] == want


def test_padding_zero_at_slice_length_16(rng):
    q = random_q(rng, 4096, 64, 0.04, CB)
    pads = [padding_stats(encode_interleaved(q, n))[1] for n in (16, 64, 256)]
    assert pads[2] == 0
    assert pads[0] >= pads[1] >= pads[2]


def test_validate_catches_non_monotone_pointer():
    e = encode_interleaved(fig2_matrix(), 4)
    s = e.slices[0]
    p = s.p.copy()
    p[3] = p[4] + 1
    bad = InterleavedCsc(e.rows, e.cols, e.n_pe, [PeSlice(s.v, s.z, p)] + e.slices[1:], e.codebook)
    v = validate(bad)
    assert len(v) == 1 and v[0].pe == 0 and v[0].column == 3
    with pytest.raises(FormatError):
        decode_interleaved(bad)


def test_validate_catches_bad_padding_and_overrun():
    s = PeSlice([0, 1], [3, 0], [0, 2])
    e = InterleavedCsc(40, 1, 1, [s], CB)
    assert any("padding" in v.message for v in validate(e))
    s = PeSlice([1], [15], [0, 1])
    e = InterleavedCsc(10, 1, 1, [s], CB)
    assert any("local row" in v.message for v in validate(e))
    s = PeSlice([1, 0], [0, 0], [0, 2])
    assert any("ends in a padding" in v.message for v in validate(InterleavedCsc(4, 1, 1, [s], CB)))


def test_pack_rejects_wide_nibbles():
    with pytest.raises(FormatError):
        PeSlice([1], [16], [0, 1]).pack()
    s = PeSlice([3, 0], [2, 15], [0, 2])
    assert s.pack() == bytes([0x23, 0xF0])
    assert PeSlice.unpack(s.p, s.pack()) == s


def test_capacity_error_names_pe():
    # one PE, one column of 70000 rows with a kept entry every row
    idx = np.ones((70000, 1), dtype=np.uint8)
    q = QuantizedSparseMatrix.from_dense_indices(idx, CB)
    with pytest.raises(CapacityError, match="PE 0"):
        encode_interleaved(q, 1)
    encode_interleaved(q, 2)  # 35000 per PE fits


def test_tiled_round_trip(rng):
    q = random_q(rng, 50, 37, 0.2, CB)
    e = encode(q, 4, 10)
    assert isinstance(e, TiledCsc) and len(e.tiles) == 4
    assert validate(e) == []
    assert decode(e) == q
    flat = encode_interleaved(q, 4)
    assert padding_stats(e) == padding_stats(flat)
    assert np.array_equal(column_counts(e), column_counts(flat))
    assert encode(q, 4, 100) == flat
    with pytest.raises(ValueError):
        encode_tiled(q, 4, 0)
