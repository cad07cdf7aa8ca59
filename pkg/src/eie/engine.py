"""Bit-exact functional model of the compressed sparse M x V.

For every nonzero input ``a_j`` each PE walks its stored entries of column
``j``, looks the 4-bit index up in the codebook and accumulates
``S[I_ij] * a_j`` into a Q(2f) int64 accumulator for row ``i``. After the
whole input is consumed the accumulators are optionally passed through
ReLU and narrowed once to 16-bit Q(f) (round half to even, saturate).
Bias is not modelled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compress import ZERO_SLOT, Codebook
from .csc import slice_coordinates, tiles_of
from .errors import AccumulatorOverflowError
from .fixedpoint import ActivationVector, FixedPointFormat, narrow, relu

ACC_LIMIT = (1 << 63) - 1


def _check_operands(e, cb: Codebook, a: ActivationVector):
    if len(a) != e.cols:
        raise ValueError(f"activation length {len(a)} does not match matrix columns {e.cols}")
    if cb.fmt != a.fmt:
        raise ValueError(f"codebook format {cb.fmt} differs from activation format {a.fmt}")


def _write_back(acc, fmt: FixedPointFormat, apply_relu: bool) -> ActivationVector:
    if apply_relu:
        acc = relu(acc)
    return ActivationVector(narrow(acc, fmt.fraction_bits), fmt)


def accumulate(e, cb: Codebook, a: ActivationVector) -> np.ndarray:
    """Q(2f) accumulators for every output row, before ReLU and narrowing."""
    _check_operands(e, cb, a)
    acc = np.zeros(e.rows, dtype=np.int64)
    w_raw = cb.raw.astype(np.int64)
    for off, t in tiles_of(e):
        a_raw = a.raw[off:off + t.cols].astype(np.int64)
        active = a_raw != 0
        for k, s in enumerate(t.slices):
            if s.n_entries == 0:
                continue
            col, lrow = slice_coordinates(s, t.cols)
            hit = active[col]
            if not hit.any():
                continue
            prod = w_raw[s.v[hit]] * a_raw[col[hit]]
            np.add.at(acc, lrow[hit] * t.n_pe + k, prod)
    return acc


def spmv_compressed(e, cb: Codebook, a: ActivationVector, apply_relu: bool = False) -> ActivationVector:
    return _write_back(accumulate(e, cb, a), a.fmt, apply_relu)


@dataclass(frozen=True)
class Work:
    """Multiply-accumulates performed for one input vector."""

    macs: int      # stored entries visited, padding included
    padding: int

    @property
    def useful(self) -> int:
        return self.macs - self.padding


def count_work(e, a: ActivationVector) -> Work:
    if len(a) != e.cols:
        raise ValueError(f"activation length {len(a)} does not match matrix columns {e.cols}")
    macs = padding = 0
    for off, t in tiles_of(e):
        active = a.raw[off:off + t.cols] != 0
        for s in t.slices:
            counts = np.diff(s.p)
            macs += int(counts[active].sum())
            if s.n_entries:
                col = np.repeat(np.arange(t.cols), counts)
                padding += int(np.count_nonzero((s.v == ZERO_SLOT) & active[col]))
    return Work(macs, padding)


def check_accumulator_bound(w_raw: np.ndarray, a_raw: np.ndarray):
    """Raise if any row's worst-case |sum| could leave int64."""
    bound = np.abs(w_raw).astype(np.float64) @ np.abs(a_raw).astype(np.float64)
    worst = float(bound.max()) if bound.size else 0.0
    if worst >= 2.0**62:
        # float bound is close to the limit: decide with exact integers
        rows = np.flatnonzero(bound >= 2.0**62)
        a_abs = [abs(int(x)) for x in a_raw]
        for i in rows:
            exact = sum(abs(int(w)) * x for w, x in zip(w_raw[i], a_abs))
            if exact > ACC_LIMIT:
                raise AccumulatorOverflowError(f"row {i} can exceed the 64-bit accumulator")


def spmv_dense_oracle(w_raw, a: ActivationVector, apply_relu: bool = False, fmt: FixedPointFormat | None = None) -> ActivationVector:
    """Dense reference over every column, zero or not.

    ``w_raw`` is the dense matrix of raw Q(f) weights (see
    ``compress.dequantize_raw``).
    """
    fmt = fmt or a.fmt
    if fmt != a.fmt:
        raise ValueError("activation format differs from requested format")
    w_raw = np.asarray(w_raw, dtype=np.int64)
    if w_raw.ndim != 2 or w_raw.shape[1] != len(a):
        raise ValueError(f"matrix shape {w_raw.shape} does not match activation length {len(a)}")
    a_raw = a.raw.astype(np.int64)
    check_accumulator_bound(w_raw, a_raw)
    acc = w_raw @ a_raw
    return _write_back(acc, fmt, apply_relu)


def run_network(layers, a0: ActivationVector, final_relu: bool = False) -> ActivationVector:
    """Feed ``a0`` through ``[(encoded matrix, Codebook), ...]`` with ReLU between layers."""
    layers = list(layers)
    if not layers:
        raise ValueError("no layers")
    for n, ((prev, _), (nxt, _)) in enumerate(zip(layers, layers[1:])):
        if prev.rows != nxt.cols:
            raise ValueError(f"layer {n} outputs {prev.rows} values but layer {n + 1} expects {nxt.cols}")
    a = a0
    last = len(layers) - 1
    for n, (e, cb) in enumerate(layers):
        a = spmv_compressed(e, cb, a, apply_relu=(n < last) or final_relu)
    return a
