"""Cycle-level model of the PE array.

Timing model
------------
* The CCU finds nonzero input activations in index order (leading nonzero
  detection) and injects at most one per cycle. A broadcast issued at
  cycle ``t`` lands in every PE's activation FIFO at ``t + broadcast_latency``.
  Flow control is credit based: the CCU holds a broadcast while any PE's
  FIFO, counting broadcasts still in flight, is full.
* Each PE has a pointer-read unit and a sparse-matrix read unit. The
  pointer unit spends one cycle reading ``p_j, p_{j+1}`` (two banks, same
  cycle) for the FIFO head, or looks one entry ahead (FIFO position 1)
  while the head is still being processed.
* The sparse-matrix unit issues one stored ``(v, z)`` entry per cycle into
  the four-stage arithmetic pipeline, starting the cycle after the
  column's pointers were read. A column leaves the FIFO when its last
  entry issues; a column with no local entries leaves at the end of its
  pointer-read cycle. Back-to-back updates of one accumulator use the
  bypass path, so the pipeline never stalls.
* When a PE owns more output rows than ``reg_file_entries`` the layer runs
  in output batches; each batch re-streams the input and waits for the
  pipelines to drain before the next one starts.

A PE cycle is busy when its arithmetic unit receives an entry; every
other compute-phase cycle is a bubble. Cycles spent only on pointer reads
are reported separately as front-end work.

Layers whose input is split into column tiles (``csc.TiledCsc``) stream
the tiles back to back; only the pointer base changes between tiles.

Two implementations of the same model are provided: ``"cycle"`` steps a
state machine per PE per cycle, ``"event"`` evaluates the equivalent
per-column recurrence vectorised over PEs. They produce identical
statistics; ``"event"`` is the default because it is much faster.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .compress import ZERO_SLOT, Codebook
from .csc import POINTER_LIMIT, slice_coordinates, tiles_of
from .engine import _check_operands, _write_back
from .errors import CapacityError, ConfigurationError
from .fixedpoint import ActivationVector

PIPELINE_STAGES = 4
ENTRY_BITS = 8


@dataclass(frozen=True)
class SimConfig:
    n_pe: int = 64
    fifo_depth: int = 8
    sram_width_bits: int = 64
    broadcast_latency: int = 2
    clock_mhz: float = 800.0
    reg_file_entries: int = 64

    def __post_init__(self):
        if self.n_pe < 1:
            raise ConfigurationError("n_pe must be >= 1")
        if self.fifo_depth < 1:
            raise ConfigurationError("fifo_depth must be >= 1")
        if self.sram_width_bits < ENTRY_BITS or self.sram_width_bits % ENTRY_BITS:
            raise ConfigurationError("sram_width_bits must be a positive multiple of 8")
        if self.broadcast_latency < 0:
            raise ConfigurationError("broadcast_latency must be >= 0")
        if self.clock_mhz <= 0:
            raise ConfigurationError("clock_mhz must be positive")
        if self.reg_file_entries < 1:
            raise ConfigurationError("reg_file_entries must be >= 1")

    @property
    def entries_per_row(self) -> int:
        return self.sram_width_bits // ENTRY_BITS

    def replace(self, **kw) -> "SimConfig":
        d = asdict(self)
        d.update(kw)
        return SimConfig(**d)


@dataclass
class SimStats:
    n_pe: int
    rows: int
    cols: int
    clock_mhz: float
    total_cycles: int = 0
    busy_cycles: np.ndarray = None
    frontend_busy_cycles: np.ndarray = None
    broadcast_stall_cycles: int = 0
    ptr_sram_reads: int = 0
    spmat_sram_row_reads: int = 0
    act_regfile_reads: int = 0
    act_regfile_writes: int = 0
    act_sram_reads: int = 0
    act_sram_writes: int = 0
    mac_count: int = 0
    padding_mac_count: int = 0
    input_nonzeros_broadcast: int = 0
    n_batches: int = 1

    def __post_init__(self):
        if self.busy_cycles is None:
            self.busy_cycles = np.zeros(self.n_pe, dtype=np.int64)
        if self.frontend_busy_cycles is None:
            self.frontend_busy_cycles = np.zeros(self.n_pe, dtype=np.int64)

    @property
    def bubble_cycles(self) -> np.ndarray:
        return self.total_cycles - self.busy_cycles

    @property
    def seconds(self) -> float:
        return self.total_cycles / (self.clock_mhz * 1e6)

    @property
    def act_accesses(self) -> int:
        return self.act_regfile_reads + self.act_regfile_writes + self.act_sram_reads + self.act_sram_writes

    def __eq__(self, other):
        if not isinstance(other, SimStats):
            return NotImplemented
        a, b = self.as_dict(), other.as_dict()
        return a == b

    def as_dict(self) -> dict:
        d = {}
        for k, v in asdict(self).items():
            d[k] = v.tolist() if isinstance(v, np.ndarray) else v
        d["bubble_cycles"] = self.bubble_cycles.tolist()
        d["seconds"] = self.seconds
        d["act_accesses"] = self.act_accesses
        return d


def lnzd_scan(a, start: int = 0, group: int = 4):
    """Next nonzero activation at or after ``start``.

    Mirrors the quadtree: every leaf owns the elements ``i`` with
    ``i % group == leaf`` and reports its first nonzero; a node keeps the
    smallest index among its children. Returns ``(j, raw)`` or ``None``.
    """
    raw = a.raw if isinstance(a, ActivationVector) else np.asarray(a)
    n = raw.shape[0]
    if not 0 <= start <= n:
        raise ValueError(f"start {start} outside [0, {n}]")
    best = None
    for leaf in range(group):
        first = start + ((leaf - start) % group)
        hits = np.flatnonzero(raw[first::group])
        if hits.size:
            j = first + int(hits[0]) * group
            if best is None or j < best:
                best = j
    if best is None:
        return None
    return best, raw[best]


def load_efficiency(stats: SimStats):
    """Per-PE and aggregate ``1 - bubble / total``.

    A run with no arithmetic work reports 1.0 by convention.
    """
    if stats.total_cycles == 0 or not stats.busy_cycles.any():
        return np.ones(stats.n_pe), 1.0
    per_pe = 1.0 - stats.bubble_cycles / stats.total_cycles
    agg = 1.0 - stats.bubble_cycles.sum() / (stats.total_cycles * stats.n_pe)
    return per_pe, float(agg)


def theoretical_cycles(e, a: ActivationVector, cfg: SimConfig):
    """Perfectly balanced time: stored entries of active columns / n_pe.

    Returns ``(cycles, seconds)``.
    """
    if len(a) != e.cols:
        raise ValueError(f"activation length {len(a)} does not match matrix columns {e.cols}")
    work = 0
    for off, t in tiles_of(e):
        active = a.raw[off:off + t.cols] != 0
        work += sum(int(np.diff(s.p)[active].sum()) for s in t.slices)
    cycles = work / cfg.n_pe
    return cycles, cycles / (cfg.clock_mhz * 1e6)


@dataclass
class _Segment:
    """Active columns of one column tile, in broadcast order."""

    offset: int
    csc: object
    active: np.ndarray        # tile-local column indices
    coords: list              # per PE: (col, local row) of every entry


@dataclass
class _Plan:
    segments: list = field(default_factory=list)
    counts: np.ndarray = None  # (n_batches, n_pe, n_broadcast)
    starts: np.ndarray = None  # matching offsets into the owning tile's slice
    owner: np.ndarray = None   # segment number of each broadcast column
    column: np.ndarray = None  # global column index of each broadcast
    row_reads: int = 0
    padding: int = 0

    @property
    def n_batches(self) -> int:
        return self.counts.shape[0]


def _plan(e, a: ActivationVector, cfg: SimConfig) -> _Plan:
    n_local = max(e.local_rows(k) for k in range(e.n_pe))
    n_batches = max(1, math.ceil(n_local / cfg.reg_file_entries))
    epr = cfg.entries_per_row
    plan = _Plan()
    counts, starts, owner, column = [], [], [], []
    for seg_no, (off, t) in enumerate(tiles_of(e)):
        is_active = a.raw[off:off + t.cols] != 0
        active = np.flatnonzero(is_active)
        seg = _Segment(off, t, active, [])
        cnt = np.zeros((n_batches, t.n_pe, active.size), dtype=np.int64)
        first_all = np.zeros_like(cnt)
        for k, s in enumerate(t.slices):
            if s.p[-1] > POINTER_LIMIT:
                raise CapacityError(f"PE {k} holds {s.p[-1]} entries, beyond the 16-bit pointer range")
            col, lrow = slice_coordinates(s, t.cols)
            seg.coords.append((col, lrow))
            if s.n_entries == 0:
                continue
            plan.padding += int(np.count_nonzero((s.v == ZERO_SLOT) & is_active[col]))
            key = col * n_batches + lrow // cfg.reg_file_entries
            per = np.bincount(key, minlength=t.cols * n_batches)
            first = np.concatenate([[0], np.cumsum(per)[:-1]])
            per = per.reshape(t.cols, n_batches)[active].T
            first = first.reshape(t.cols, n_batches)[active].T
            cnt[:, k, :] = per
            first_all[:, k, :] = first
            nz = per > 0
            last = first + per - 1
            plan.row_reads += int((last[nz] // epr - first[nz] // epr + 1).sum())
        plan.segments.append(seg)
        counts.append(cnt)
        starts.append(first_all)
        owner.append(np.full(active.size, seg_no))
        column.append(active + off)
    plan.counts = np.concatenate(counts, axis=2)
    plan.starts = np.concatenate(starts, axis=2)
    plan.owner = np.concatenate(owner)
    plan.column = np.concatenate(column)
    return plan


def _event_batch(counts, cfg: SimConfig, t0: int):
    """Evaluate one batch with the per-column recurrence.

    Returns ``(end_cycle, frontend_busy_per_pe, stall_cycles)``;
    ``end_cycle`` is the last cycle with any activity (``t0 - 1`` when
    there is none).
    """
    n_pe, n_col = counts.shape
    if n_col == 0:
        return t0 - 1, np.zeros(n_pe, dtype=np.int64), 0
    depth, lat = cfg.fifo_depth, cfg.broadcast_latency
    pops = np.full((n_col, n_pe), t0 - 1, dtype=np.int64)
    ptr_prev = np.full(n_pe, t0 - 1, dtype=np.int64)
    pop_prev = np.full(n_pe, t0 - 1, dtype=np.int64)
    pop_prev2 = np.full(n_pe, t0 - 1, dtype=np.int64)
    iss_start_prev = np.zeros(n_pe, dtype=np.int64)
    n_prev = np.zeros(n_pe, dtype=np.int64)
    overlap = np.zeros(n_pe, dtype=np.int64)
    last_issue = np.full(n_pe, t0 - 1 - PIPELINE_STAGES, dtype=np.int64)
    inject_prev = t0 - 1
    stalls = 0
    for c in range(n_col):
        earliest = inject_prev + 1
        inject = earliest
        if c >= depth:
            inject = max(inject, int(pops[c - depth].max()) + 1)
        stalls += inject - earliest
        inject_prev = inject
        arrive = inject + lat
        ptr = np.maximum(np.maximum(ptr_prev + 1, pop_prev2 + 1), arrive)
        n = counts[:, c]
        overlap += (n_prev > 0) & (ptr >= iss_start_prev) & (ptr <= pop_prev)
        iss_start = np.maximum(ptr + 1, pop_prev + 1)
        has = n > 0
        pop = np.where(has, iss_start + n - 1, np.maximum(ptr, pop_prev))
        last_issue = np.where(has, pop, last_issue)
        pops[c] = pop
        pop_prev2, pop_prev, ptr_prev = pop_prev, pop, ptr
        iss_start_prev, n_prev = iss_start, n
    busy = counts.sum(axis=1) + n_col - overlap
    end = int(max((last_issue + PIPELINE_STAGES - 1).max(), ptr_prev.max()))
    return end, busy.astype(np.int64), stalls


class _PE:
    """State machine for one PE in the cycle-stepped model."""

    def __init__(self, k, counts, on_issue):
        self.k = k
        self.counts = counts
        self.on_issue = on_issue
        self.fifo = deque()          # broadcast ordinals, head first
        self.ptr_done = {}           # ordinal -> entries remaining
        self.busy = 0
        self.last_issue = None
        self.last_ptr = None

    def idle(self):
        return not self.fifo

    def step(self, t):
        worked = False
        pop_head = False
        head = self.fifo[0] if self.fifo else None
        # sparse-matrix read unit: one entry per cycle for the head column
        if head is not None and self.ptr_done.get(head, 0) > 0:
            done = self.counts[head] - self.ptr_done[head]
            self.on_issue(self.k, head, done)
            self.ptr_done[head] -= 1
            self.last_issue = t
            worked = True
            pop_head = self.ptr_done[head] == 0
        # pointer read unit: head first, else one column of lookahead
        target = None
        if head is not None and head not in self.ptr_done:
            target = head
        elif len(self.fifo) > 1 and self.fifo[1] not in self.ptr_done:
            target = self.fifo[1]
        if target is not None:
            self.ptr_done[target] = self.counts[target]
            self.last_ptr = t
            worked = True
        if worked:
            self.busy += 1
        popped = 0
        if pop_head:
            del self.ptr_done[self.fifo.popleft()]
            popped += 1
        while self.fifo and self.ptr_done.get(self.fifo[0], -1) == 0:
            del self.ptr_done[self.fifo.popleft()]
            popped += 1
        return popped

    def last_activity(self):
        ends = []
        if self.last_issue is not None:
            ends.append(self.last_issue + PIPELINE_STAGES - 1)
        if self.last_ptr is not None:
            ends.append(self.last_ptr)
        return max(ends) if ends else None


def _cycle_batch(counts, cfg: SimConfig, t0: int, on_issue):
    n_pe, n_col = counts.shape
    if n_col == 0:
        return t0 - 1, np.zeros(n_pe, dtype=np.int64), 0
    pes = [_PE(k, counts[k], on_issue) for k in range(n_pe)]
    occupancy = np.zeros(n_pe, dtype=np.int64)   # queued + in flight
    in_flight = deque()                          # (arrival cycle, ordinal)
    next_col = 0
    stalls = 0
    t = t0
    while True:
        if next_col < n_col:
            if np.all(occupancy < cfg.fifo_depth):
                in_flight.append((t + cfg.broadcast_latency, next_col))
                occupancy += 1
                next_col += 1
            else:
                stalls += 1
        while in_flight and in_flight[0][0] == t:
            _, c = in_flight.popleft()
            for pe in pes:
                pe.fifo.append(c)
        for pe in pes:
            occupancy[pe.k] -= pe.step(t)
        if next_col == n_col and not in_flight and all(pe.idle() for pe in pes):
            break
        t += 1
    end = max(pe.last_activity() for pe in pes)
    return end, np.array([pe.busy for pe in pes], dtype=np.int64), stalls


def simulate(
    e,
    cb: Codebook,
    a: ActivationVector,
    cfg: SimConfig | None = None,
    apply_relu: bool = False,
    method: str = "event",
):
    """Run one layer. Returns ``(output, stats)``.

    ``e`` is an ``InterleavedCsc`` or a ``TiledCsc``. ``method`` selects
    the cycle-stepped (``"cycle"``) or recurrence (``"event"``)
    evaluation of the timing model.
    """
    cfg = cfg or SimConfig(n_pe=e.n_pe)
    if e.n_pe != cfg.n_pe:
        raise ConfigurationError(f"matrix is encoded for {e.n_pe} PEs but config has {cfg.n_pe}")
    _check_operands(e, cb, a)
    if method not in ("event", "cycle"):
        raise ValueError(f"unknown method {method!r}")

    plan = _plan(e, a, cfg)
    n_batches = plan.n_batches
    n_bcast = plan.counts.shape[2]
    a_raw = a.raw.astype(np.int64)
    w_raw = cb.raw.astype(np.int64)
    acc = np.zeros(e.rows, dtype=np.int64)
    stats = SimStats(cfg.n_pe, e.rows, e.cols, cfg.clock_mhz, n_batches=n_batches)

    t0 = 0
    end = -1
    for b in range(n_batches):
        counts = plan.counts[b]
        if method == "cycle":
            starts = plan.starts[b]

            def on_issue(k, c, nth, starts=starts):
                seg = plan.segments[plan.owner[c]]
                off = starts[k, c] + nth
                row = seg.coords[k][1][off] * e.n_pe + k
                acc[row] += w_raw[seg.csc.slices[k].v[off]] * a_raw[plan.column[c]]

            b_end, frontend, stalls = _cycle_batch(counts, cfg, t0, on_issue)
        else:
            b_end, frontend, stalls = _event_batch(counts, cfg, t0)
        stats.frontend_busy_cycles += frontend
        stats.busy_cycles += counts.sum(axis=1)
        stats.broadcast_stall_cycles += stalls
        if b_end >= t0:
            end = b_end
            t0 = b_end + 1

    if method == "event":
        for seg in plan.segments:
            seg_a = a_raw[seg.offset:seg.offset + seg.csc.cols]
            for k, s in enumerate(seg.csc.slices):
                col, lrow = seg.coords[k]
                hit = (seg_a != 0)[col]
                if hit.any():
                    np.add.at(acc, lrow[hit] * e.n_pe + k, w_raw[s.v[hit]] * seg_a[col[hit]])

    macs = int(stats.busy_cycles.sum())
    input_fits = e.cols <= cfg.n_pe * cfg.reg_file_entries
    stats.total_cycles = end + 1
    stats.mac_count = macs
    stats.padding_mac_count = plan.padding
    stats.input_nonzeros_broadcast = n_bcast * n_batches
    stats.ptr_sram_reads = cfg.n_pe * n_bcast * n_batches
    stats.spmat_sram_row_reads = plan.row_reads
    stats.act_regfile_reads = macs + (e.cols * n_batches if input_fits else 0)
    stats.act_regfile_writes = macs
    stats.act_sram_reads = 0 if input_fits else e.cols * n_batches
    stats.act_sram_writes = e.rows if n_batches > 1 else 0

    return _write_back(acc, a.fmt, apply_relu), stats
