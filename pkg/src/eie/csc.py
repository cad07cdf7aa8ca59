"""Interleaved, relative-indexed CSC encoding.

With ``N`` PEs, PE ``k`` owns global rows ``i`` with ``i % N == k`` and
stores them as local rows ``i // N``. For every column the PE keeps a run
of ``(v, z)`` entries: ``v`` is the 4-bit codebook index and ``z`` the
number of local zero rows skipped before the entry. Zero counts restart at
each column. A gap longer than 15 is bridged by padding entries
``(v=0, z=15)``, each of which occupies one zero row.

Layout of a PE slice in memory::

    p : uint16[cols + 1]   p[j] .. p[j+1]-1 are column j's entries
    v : uint8[p[cols]]     low nibble of the packed byte
    z : uint8[p[cols]]     high nibble of the packed byte
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compress import ZERO_SLOT, Codebook, QuantizedSparseMatrix
from .errors import CapacityError, FormatError

MAX_ZERO_RUN = 15
POINTER_LIMIT = 0xFFFF


def local_rows(rows: int, n_pe: int, k: int) -> int:
    """Number of rows owned by PE ``k``."""
    return max(0, (rows - k + n_pe - 1) // n_pe)


@dataclass(eq=False)
class PeSlice:
    v: np.ndarray
    z: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.uint8)
        self.z = np.asarray(self.z, dtype=np.uint8)
        self.p = np.asarray(self.p, dtype=np.int64)

    @property
    def n_entries(self) -> int:
        return int(self.v.shape[0])

    def column(self, j: int):
        lo, hi = self.p[j], self.p[j + 1]
        return self.v[lo:hi], self.z[lo:hi]

    def pack(self) -> bytes:
        """Entries as bytes: low nibble v, high nibble z."""
        if self.n_entries and (self.v.max() > 15 or self.z.max() > 15):
            raise FormatError("v or z value does not fit in 4 bits")
        return ((self.z << 4) | self.v).astype(np.uint8).tobytes()

    @classmethod
    def unpack(cls, p, data: bytes) -> "PeSlice":
        b = np.frombuffer(data, dtype=np.uint8)
        return cls(b & 0x0F, b >> 4, p)

    def __eq__(self, other):
        if not isinstance(other, PeSlice):
            return NotImplemented
        return (
            np.array_equal(self.v, other.v)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.p, other.p)
        )


@dataclass(eq=False)
class InterleavedCsc:
    rows: int
    cols: int
    n_pe: int
    slices: list = field(default_factory=list)
    codebook: Codebook | None = None

    @property
    def shape(self):
        return (self.rows, self.cols)

    def local_rows(self, k: int) -> int:
        return local_rows(self.rows, self.n_pe, k)

    @property
    def n_entries(self) -> int:
        return sum(s.n_entries for s in self.slices)

    def __eq__(self, other):
        if not isinstance(other, InterleavedCsc):
            return NotImplemented
        return (
            (self.rows, self.cols, self.n_pe) == (other.rows, other.cols, other.n_pe)
            and self.codebook == other.codebook
            and len(self.slices) == len(other.slices)
            and all(a == b for a, b in zip(self.slices, other.slices))
        )


def _encode_slice(lrow, col, idx, cols: int, k: int) -> PeSlice:
    # lrow/col/idx are this PE's kept entries, sorted by (col, lrow)
    n = lrow.shape[0]
    if n == 0:
        return PeSlice(np.zeros(0), np.zeros(0), np.zeros(cols + 1))
    prev = np.empty(n, dtype=np.int64)
    prev[0] = -1
    prev[1:] = lrow[:-1]
    starts = np.ones(n, dtype=bool)
    starts[1:] = col[1:] != col[:-1]
    prev[starts] = -1
    gap = lrow - prev - 1
    n_pad = gap // (MAX_ZERO_RUN + 1)
    z_real = gap - n_pad * (MAX_ZERO_RUN + 1)

    total = n + int(n_pad.sum())
    if total > POINTER_LIMIT:
        raise CapacityError(
            f"PE {k} needs {total} entries, exceeding the 16-bit pointer limit of {POINTER_LIMIT}"
        )
    v = np.full(total, ZERO_SLOT, dtype=np.uint8)
    z = np.full(total, MAX_ZERO_RUN, dtype=np.uint8)
    pos = np.cumsum(n_pad + 1) - 1
    v[pos] = idx
    z[pos] = z_real
    per_col = np.bincount(col, weights=n_pad + 1, minlength=cols).astype(np.int64)
    p = np.zeros(cols + 1, dtype=np.int64)
    np.cumsum(per_col, out=p[1:])
    return PeSlice(v, z, p)


def encode_interleaved(q: QuantizedSparseMatrix, n_pe: int) -> InterleavedCsc:
    if n_pe < 1:
        raise ValueError("n_pe must be >= 1")
    pe = q.row % n_pe
    lrow = q.row // n_pe
    slices = []
    for k in range(n_pe):
        sel = pe == k
        # q is column-major, so each PE's subset stays sorted by (col, row)
        slices.append(_encode_slice(lrow[sel], q.col[sel], q.index[sel], q.cols, k))
    return InterleavedCsc(q.rows, q.cols, n_pe, slices, q.codebook)


def slice_coordinates(s: PeSlice, cols: int):
    """Column and local row of every stored entry (padding included)."""
    counts = np.diff(s.p)
    col = np.repeat(np.arange(cols, dtype=np.int64), counts)
    step = s.z.astype(np.int64) + 1
    run = np.cumsum(step)
    # subtract the running total at each column start
    base = np.concatenate([[0], run])[s.p[:-1]]
    lrow = run - np.repeat(base, counts) - 1
    return col, lrow


def _structural_violations(s: PeSlice, k: int, cols: int, n_local: int) -> list:
    out = []
    p = s.p
    if p.shape != (cols + 1,):
        out.append(Violation(k, None, None, f"pointer array has length {p.shape[0]}, expected {cols + 1}"))
        return out
    if p[0] != 0:
        out.append(Violation(k, 0, 0, f"p[0] = {p[0]}, expected 0"))
    for j in np.flatnonzero(np.diff(p) < 0):
        out.append(Violation(k, int(j), int(p[j]), f"pointers decrease: p[{j}]={p[j]} > p[{j + 1}]={p[j + 1]}"))
    if p[-1] != s.n_entries:
        out.append(Violation(k, cols - 1, int(p[-1]), f"p[cols] = {p[-1]} but slice holds {s.n_entries} entries"))
    if s.v.shape != s.z.shape:
        out.append(Violation(k, None, None, "v and z differ in length"))
    if p[-1] > POINTER_LIMIT or (p.size and p.max() > POINTER_LIMIT):
        out.append(Violation(k, None, None, f"pointer exceeds 16-bit limit ({int(p.max())})"))
    for off in np.flatnonzero(s.v > 15):
        out.append(Violation(k, None, int(off), f"v = {s.v[off]} exceeds 4 bits"))
    for off in np.flatnonzero(s.z > 15):
        out.append(Violation(k, None, int(off), f"z = {s.z[off]} exceeds 4 bits"))
    if out:
        return out
    col, lrow = slice_coordinates(s, cols)
    for off in np.flatnonzero(lrow >= n_local):
        out.append(
            Violation(k, int(col[off]), int(off), f"zero run reaches local row {lrow[off]} but PE owns {n_local} rows")
        )
    return out


@dataclass(frozen=True)
class Violation:
    pe: int
    column: int | None
    offset: int | None
    message: str

    def __str__(self):
        return f"PE {self.pe}, column {self.column}, offset {self.offset}: {self.message}"


def validate(e) -> list:
    """All invariant violations, as a list (empty when the encoding is valid)."""
    if isinstance(e, TiledCsc):
        out = []
        if len(e.tiles) != len(e.offsets):
            out.append(Violation(-1, None, None, f"{len(e.tiles)} tiles for {e.cols} columns of width {e.tile_cols}"))
        for off, t in tiles_of(e):
            for v in validate(t):
                col = None if v.column is None else v.column + off
                out.append(Violation(v.pe, col, v.offset, f"tile at column {off}: {v.message}"))
        return out
    out = []
    if e.n_pe < 1:
        return [Violation(-1, None, None, "n_pe must be >= 1")]
    if len(e.slices) != e.n_pe:
        out.append(Violation(-1, None, None, f"{len(e.slices)} slices for {e.n_pe} PEs"))
    for k, s in enumerate(e.slices):
        structural = _structural_violations(s, k, e.cols, e.local_rows(k))
        out.extend(structural)
        if structural or s.n_entries == 0:
            continue
        pad = np.flatnonzero(s.v == ZERO_SLOT)
        for off in pad[s.z[pad] != MAX_ZERO_RUN]:
            col = int(np.searchsorted(s.p, off, side="right") - 1)
            out.append(Violation(k, col, int(off), f"padding entry with z = {s.z[off]} (expected {MAX_ZERO_RUN})"))
        last = s.p[1:][np.diff(s.p) > 0] - 1
        for off in last[s.v[last] == ZERO_SLOT]:
            col = int(np.searchsorted(s.p, off, side="right") - 1)
            out.append(Violation(k, col, int(off), "column ends in a padding entry"))
    if e.codebook is not None and e.codebook.raw[ZERO_SLOT] != 0:
        out.append(Violation(-1, None, None, "codebook slot 0 is not zero"))
    return out


def decode_interleaved(e: InterleavedCsc, codebook: Codebook | None = None) -> QuantizedSparseMatrix:
    cb = codebook if codebook is not None else e.codebook
    if cb is None:
        raise ValueError("no codebook supplied")
    if len(e.slices) != e.n_pe:
        raise FormatError(f"{len(e.slices)} slices for {e.n_pe} PEs")
    rows, cols, idx = [], [], []
    for k, s in enumerate(e.slices):
        bad = _structural_violations(s, k, e.cols, e.local_rows(k))
        if bad:
            raise FormatError(str(bad[0]))
        col, lrow = slice_coordinates(s, e.cols)
        keep = s.v != ZERO_SLOT
        rows.append(lrow[keep] * e.n_pe + k)
        cols.append(col[keep])
        idx.append(s.v[keep])
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)
    return QuantizedSparseMatrix(e.rows, e.cols, cat(rows), cat(cols), cat(idx), cb)


def padding_stats(e):
    """Padding entries per PE and in total."""
    per_pe = [0] * e.n_pe
    for _, t in tiles_of(e):
        for k, s in enumerate(t.slices):
            per_pe[k] += int(np.count_nonzero(s.v == ZERO_SLOT))
    return per_pe, sum(per_pe)


def column_counts(e) -> np.ndarray:
    """``(n_pe, cols)`` array of stored entries per PE per column."""
    return np.concatenate([np.stack([np.diff(s.p) for s in t.slices]) for _, t in tiles_of(e)], axis=1)



@dataclass(eq=False)
class TiledCsc:
    """A layer split into column tiles, each with its own pointer array.

    Used when the input vector is longer than the PEs' source register
    files can hold; tile ``t`` covers columns ``t * tile_cols`` onwards.
    """

    rows: int
    cols: int
    n_pe: int
    tile_cols: int
    tiles: list = field(default_factory=list)
    codebook: Codebook | None = None

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def offsets(self) -> list:
        return list(range(0, self.cols, self.tile_cols))

    @property
    def n_entries(self) -> int:
        return sum(t.n_entries for t in self.tiles)

    def local_rows(self, k: int) -> int:
        return local_rows(self.rows, self.n_pe, k)

    def __eq__(self, other):
        if not isinstance(other, TiledCsc):
            return NotImplemented
        return (
            (self.rows, self.cols, self.n_pe, self.tile_cols)
            == (other.rows, other.cols, other.n_pe, other.tile_cols)
            and self.codebook == other.codebook
            and len(self.tiles) == len(other.tiles)
            and all(a == b for a, b in zip(self.tiles, other.tiles))
        )


def encode_tiled(q: QuantizedSparseMatrix, n_pe: int, tile_cols: int) -> TiledCsc:
    if tile_cols < 1:
        raise ValueError("tile_cols must be >= 1")
    tiles = []
    for off in range(0, q.cols, tile_cols):
        width = min(tile_cols, q.cols - off)
        sel = (q.col >= off) & (q.col < off + width)
        sub = QuantizedSparseMatrix(q.rows, width, q.row[sel], q.col[sel] - off, q.index[sel], q.codebook)
        try:
            tiles.append(encode_interleaved(sub, n_pe))
        except CapacityError as exc:
            raise CapacityError(f"column tile at {off}: {exc}") from None
    return TiledCsc(q.rows, q.cols, n_pe, tile_cols, tiles, q.codebook)


def encode(q: QuantizedSparseMatrix, n_pe: int, tile_cols: int | None = None):
    """Plain encoding, or a tiled one when ``tile_cols`` is narrower than the matrix."""
    if tile_cols is None or tile_cols >= q.cols:
        return encode_interleaved(q, n_pe)
    return encode_tiled(q, n_pe, tile_cols)


def tiles_of(e) -> list:
    """``[(column offset, InterleavedCsc), ...]`` for either encoding."""
    if isinstance(e, TiledCsc):
        return list(zip(e.offsets, e.tiles))
    return [(0, e)]


def decode(e, codebook: Codebook | None = None) -> QuantizedSparseMatrix:
    cb = codebook if codebook is not None else e.codebook
    if not isinstance(e, TiledCsc):
        return decode_interleaved(e, cb)
    if len(e.tiles) != len(e.offsets):
        raise FormatError(f"{len(e.tiles)} tiles for {e.cols} columns of width {e.tile_cols}")
    rows, cols, idx = [], [], []
    for off, t in tiles_of(e):
        sub = decode_interleaved(t, cb)
        rows.append(sub.row)
        cols.append(sub.col + off)
        idx.append(sub.index)
    return QuantizedSparseMatrix(e.rows, e.cols, np.concatenate(rows), np.concatenate(cols), np.concatenate(idx), cb)
