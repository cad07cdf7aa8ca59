"""Pruning and weight-sharing front end.

A dense ``rows x cols`` weight matrix (output dimension first) is pruned
with a single global magnitude threshold and its surviving weights are
clustered into a 16-entry fixed-point codebook. Slot 0 of every codebook
is pinned to exact zero; it is reserved for the padding entries of the
encoded format and is never assigned to a kept weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import FixedPointFormat, Q8_8, to_fixed, to_real

CODEBOOK_SIZE = 16
ZERO_SLOT = 0
MAX_KMEANS_ITER = 50


def as_dense(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {w.shape}")
    return w


@dataclass(frozen=True, eq=False)
class Codebook:
    """16 shared weights as raw fixed-point values."""

    raw: np.ndarray
    fmt: FixedPointFormat = Q8_8

    def __post_init__(self):
        raw = np.asarray(self.raw)
        if raw.shape != (CODEBOOK_SIZE,):
            raise ValueError(f"codebook must have {CODEBOOK_SIZE} entries, got {raw.shape}")
        if raw[ZERO_SLOT] != 0:
            raise ValueError("codebook slot 0 is reserved for padding and must be zero")
        object.__setattr__(self, "raw", raw.astype(np.int16))

    @classmethod
    def from_values(cls, values, fmt: FixedPointFormat = Q8_8) -> "Codebook":
        """Build from 15 real values for slots 1..15 (or 16 with a leading zero)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape == (CODEBOOK_SIZE - 1,):
            values = np.concatenate([[0.0], values])
        raw, _ = to_fixed(values, fmt)
        return cls(raw, fmt)

    @property
    def values(self) -> np.ndarray:
        return to_real(self.raw, self.fmt)

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return self.fmt == other.fmt and np.array_equal(self.raw, other.raw)

    def __len__(self):
        return CODEBOOK_SIZE


@dataclass(eq=False)
class QuantizedSparseMatrix:
    """Pruned matrix of 4-bit codebook indices.

    Kept entries are stored as coordinate arrays sorted column-major
    (by column, then row). Indices are in 1..15.
    """

    rows: int
    cols: int
    row: np.ndarray
    col: np.ndarray
    index: np.ndarray
    codebook: Codebook

    def __post_init__(self):
        self.row = np.asarray(self.row, dtype=np.int64)
        self.col = np.asarray(self.col, dtype=np.int64)
        self.index = np.asarray(self.index, dtype=np.uint8)
        if not (self.row.shape == self.col.shape == self.index.shape) or self.row.ndim != 1:
            raise ValueError("row, col and index must be 1-D arrays of equal length")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be >= 1")
        if self.nnz:
            if self.row.min() < 0 or self.row.max() >= self.rows:
                raise ValueError("row index out of range")
            if self.col.min() < 0 or self.col.max() >= self.cols:
                raise ValueError("column index out of range")
            if self.index.min() < 1 or self.index.max() >= CODEBOOK_SIZE:
                raise ValueError("kept entries must use codebook slots 1..15")
            order = np.lexsort((self.row, self.col))
            if not np.array_equal(order, np.arange(self.nnz)):
                self.row, self.col, self.index = self.row[order], self.col[order], self.index[order]
            key = self.col * self.rows + self.row
            if np.any(np.diff(key) == 0):
                raise ValueError("duplicate coordinates")

    @classmethod
    def from_dense_indices(cls, idx, codebook: Codebook) -> "QuantizedSparseMatrix":
        """Build from a dense array of indices where 0 means 'not kept'."""
        idx = np.asarray(idx)
        c, r = np.nonzero(idx.T)
        return cls(idx.shape[0], idx.shape[1], r, c, idx[r, c], codebook)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.index.shape[0])

    @property
    def density(self) -> float:
        return self.nnz / (self.rows * self.cols)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.row, self.col] = True
        return m

    def dense_indices(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.uint8)
        out[self.row, self.col] = self.index
        return out

    def __eq__(self, other):
        if not isinstance(other, QuantizedSparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.codebook == other.codebook
            and np.array_equal(self.row, other.row)
            and np.array_equal(self.col, other.col)
            and np.array_equal(self.index, other.index)
        )


def prune_magnitude(w, target_density: float) -> np.ndarray:
    """Keep the ``round(d * rows * cols)`` largest-magnitude weights.

    Ties at the threshold go to the lowest row-major position.
    """
    w = as_dense(w)
    if not 0 < target_density <= 1:
        raise ValueError(f"target_density must be in (0, 1], got {target_density}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contain non-finite values")
    n = w.size
    k = int(round(target_density * n))
    mag = np.abs(w).ravel()
    keep = np.zeros(n, dtype=bool)
    if k >= n:
        keep[:] = True
    elif k > 0:
        thresh = np.partition(mag, n - k)[n - k]
        above = mag > thresh
        keep[above] = True
        need = k - int(above.sum())
        ties = np.flatnonzero(mag == thresh)
        keep[ties[:need]] = True
    return keep.reshape(w.shape)


def _assign_sorted(x, centers):
    """Nearest center for each x; centers ascending, ties to the lower index."""
    mid = (centers[1:] + centers[:-1]) / 2
    return np.searchsorted(mid, x, side="left")


def _kmeans_1d(x, k, max_iter=MAX_KMEANS_ITER):
    centers = np.linspace(x.min(), x.max(), k)
    for _ in range(max_iter):
        labels = _assign_sorted(x, centers)
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=x, minlength=k)
        new = centers.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled]
        empty = np.flatnonzero(~filled)
        if empty.size:
            dist = np.abs(x - centers[labels])
            for e in empty:
                far = int(np.argmax(dist))
                new[e] = x[far]
                dist[far] = -1.0
        new = np.sort(new)
        if np.array_equal(new, centers):
            break
        centers = new
    return centers


def build_codebook(w, mask, k: int = CODEBOOK_SIZE, fmt: FixedPointFormat = Q8_8) -> Codebook:
    """Deterministic 1-D k-means codebook over the kept weights.

    Slot 0 is zero; slots 1..15 hold the sorted cluster centers. When the
    kept weights take at most 15 distinct values they are used verbatim
    and the remaining slots are zero.
    """
    if k != CODEBOOK_SIZE:
        raise ValueError("only 16-entry codebooks are supported")
    w = as_dense(w)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != w.shape:
        raise ValueError("mask shape does not match matrix")
    x = w[mask]
    if x.size == 0:
        raise ValueError("mask keeps no weights")
    if not np.all(np.isfinite(x)):
        raise ValueError("weights contain non-finite values")
    n_free = k - 1
    distinct = np.unique(x)
    if distinct.size <= n_free:
        centers = np.zeros(n_free)
        centers[: distinct.size] = distinct
    else:
        centers = _kmeans_1d(x, n_free)
    return Codebook.from_values(centers, fmt)


def nearest_slot(x, codebook: Codebook) -> np.ndarray:
    """Index of the nearest non-padding slot; ties to the lowest index.

    Distances are measured in raw units so equidistant cases are exact.
    """
    scaled = np.asarray(x, dtype=np.float64) * codebook.fmt.scale
    best = np.full(scaled.shape, np.inf)
    best_idx = np.zeros(scaled.shape, dtype=np.uint8)
    for s in range(1, CODEBOOK_SIZE):
        d = np.abs(scaled - float(codebook.raw[s]))
        better = d < best
        best[better] = d[better]
        best_idx[better] = s
    return best_idx


def quantize(w, mask, codebook: Codebook) -> QuantizedSparseMatrix:
    w = as_dense(w)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != w.shape:
        raise ValueError("mask shape does not match matrix")
    c, r = np.nonzero(mask.T)
    idx = nearest_slot(w[r, c], codebook)
    return QuantizedSparseMatrix(w.shape[0], w.shape[1], r, c, idx, codebook)


def dequantize(q: QuantizedSparseMatrix) -> np.ndarray:
    out = np.zeros(q.shape, dtype=np.float64)
    out[q.row, q.col] = q.codebook.values[q.index]
    return out


def dequantize_raw(q: QuantizedSparseMatrix) -> np.ndarray:
    """Dense int64 matrix of raw fixed-point weights."""
    out = np.zeros(q.shape, dtype=np.int64)
    out[q.row, q.col] = q.codebook.raw[q.index]
    return out


def compress(w, density: float, fmt: FixedPointFormat = Q8_8) -> QuantizedSparseMatrix:
    """prune -> codebook -> quantize in one call."""
    mask = prune_magnitude(w, density)
    cb = build_codebook(w, mask, fmt=fmt)
    return quantize(w, mask, cb)
