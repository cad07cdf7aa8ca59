"""Benchmark layers, synthetic workloads and design-space sweeps."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .compress import CODEBOOK_SIZE, Codebook, QuantizedSparseMatrix
from .csc import encode, padding_stats
from .cyclesim import SimConfig, load_efficiency, simulate, theoretical_cycles
from .energy import EnergyTable, estimate_energy
from .fixedpoint import ActivationVector, FixedPointFormat, Q8_8


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    in_dim: int
    out_dim: int
    weight_density: float
    activation_density: float
    seed: int = 0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("dimensions must be >= 1")
        for d in (self.weight_density, self.activation_density):
            if not 0 < d <= 1:
                raise ValueError("densities must be in (0, 1]")

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    def with_seed(self, seed: int) -> "BenchmarkSpec":
        return replace(self, seed=seed)

    def scaled(self, in_dim: int | None = None, out_dim: int | None = None) -> "BenchmarkSpec":
        """Same densities at a different size."""
        return replace(self, in_dim=in_dim or self.in_dim, out_dim=out_dim or self.out_dim)


# name: (in, out, weight density, activation density)
_PRESETS = {
    "Alex-6": (9216, 4096, 0.09, 0.351),
    "Alex-7": (4096, 4096, 0.09, 0.353),
    "Alex-8": (4096, 1000, 0.25, 0.375),
    "VGG-6": (25088, 4096, 0.04, 0.183),
    "VGG-7": (4096, 4096, 0.04, 0.375),
    "VGG-8": (4096, 1000, 0.23, 0.411),
    "NT-We": (4096, 600, 0.10, 1.0),
    "NT-Wd": (600, 8791, 0.11, 1.0),
    "NT-LSTM": (1201, 2400, 0.10, 1.0),
}

PRESET_NAMES = tuple(_PRESETS)
CNN_PRESETS = PRESET_NAMES[:6]


def preset(name: str, seed: int = 0) -> BenchmarkSpec:
    try:
        in_dim, out_dim, wd, ad = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(_PRESETS)}") from None
    return BenchmarkSpec(name, in_dim, out_dim, wd, ad, seed)


# activation magnitudes in (0, ACT_MAX]; any 16-bit operands keep a
# 25088-term Q(2f) sum below 2**45, far inside int64
ACT_MAX = 4.0


def generate_synthetic(spec: BenchmarkSpec, fmt: FixedPointFormat = Q8_8):
    """Bernoulli-masked quantized matrix and sparse nonnegative input.

    Returns ``(QuantizedSparseMatrix, ActivationVector)``; fully
    determined by ``spec`` (including its seed).
    """
    rng = np.random.default_rng(spec.seed)
    rows, cols = spec.shape
    centers = np.sort(rng.uniform(-1.0, 1.0, CODEBOOK_SIZE - 1))
    cb = Codebook.from_values(centers, fmt)

    chunk = max(1, (1 << 22) // cols)
    rs, cs = [], []
    for r0 in range(0, rows, chunk):
        block = rng.random((min(chunk, rows - r0), cols)) < spec.weight_density
        r, c = np.nonzero(block)
        rs.append(r + r0)
        cs.append(c)
    r = np.concatenate(rs)
    c = np.concatenate(cs)
    order = np.lexsort((r, c))
    r, c = r[order], c[order]
    idx = rng.integers(1, CODEBOOK_SIZE, size=r.size)
    q = QuantizedSparseMatrix(rows, cols, r, c, idx, cb)

    support = rng.random(cols) < spec.activation_density
    mags = rng.integers(1, int(ACT_MAX * fmt.scale) + 1, size=cols)
    a = ActivationVector(np.where(support, mags, 0).astype(np.int16), fmt)
    return q, a


AXES = {
    "fifo_depth": "fifo_depth",
    "fifo": "fifo_depth",
    "n_pe": "n_pe",
    "pes": "n_pe",
    "sram_width": "sram_width_bits",
    "sram": "sram_width_bits",
    "sram_width_bits": "sram_width_bits",
}


@dataclass
class SweepPoint:
    value: int
    efficiency: float = float("nan")
    cycles: int = 0
    seconds: float = float("nan")
    theoretical_cycles: float = float("nan")
    padding: int = 0
    energy_j: float = float("nan")
    spmat_row_reads: int = 0
    error: str = ""


@dataclass
class SweepResult:
    axis: str
    values: list
    points: list = field(default_factory=list)
    benchmark: str = ""

    FIELDS = ("value", "efficiency", "cycles", "seconds", "theoretical_cycles",
              "padding", "energy_j", "spmat_row_reads", "error")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.axis if f == "value" else f for f in self.FIELDS])
        for p in self.points:
            w.writerow([_fmt(getattr(p, f)) for f in self.FIELDS])
        return buf.getvalue()


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _run_point(q, a, cfg: SimConfig, table, method):
    limit = cfg.n_pe * cfg.reg_file_entries
    e = encode(q, cfg.n_pe, limit if q.cols > limit else None)
    out, stats = simulate(e, q.codebook, a, cfg, method=method)
    _, eff = load_efficiency(stats)
    theo, _ = theoretical_cycles(e, a, cfg)
    _, pad = padding_stats(e)
    energy = estimate_energy(stats, cfg, table)
    return out, stats, eff, theo, pad, energy


def _point_task(args):
    q, a, cfg, table, method, value = args
    point = SweepPoint(value)
    try:
        out, stats, eff, theo, pad, energy = _run_point(q, a, cfg, table, method)
    except Exception as exc:  # annotated on the point, sweep continues
        point.error = f"{type(exc).__name__}: {exc}"
        return point, None
    point.efficiency = eff
    point.cycles = stats.total_cycles
    point.seconds = stats.seconds
    point.theoretical_cycles = theo
    point.padding = pad
    point.energy_j = energy.total
    point.spmat_row_reads = stats.spmat_sram_row_reads
    return point, out


def default_workers() -> int:
    cap = os.environ.get("EIE_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else 1


def sweep(spec_or_workload, base_cfg: SimConfig, axis: str, values, table: EnergyTable | None = None,
          workers: int | None = None, method: str = "event") -> SweepResult:
    """Simulate one workload at every value of one configuration axis.

    ``spec_or_workload`` is a ``BenchmarkSpec`` or a ``(q, a)`` pair.
    Points that fail carry the error text; every successful point must
    produce the same output activations.
    """
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(sorted(AXES))}")
    values = list(values)
    if not values:
        raise ValueError("no sweep values")
    field_name = AXES[axis]
    if isinstance(spec_or_workload, BenchmarkSpec):
        q, a = generate_synthetic(spec_or_workload)
        name = spec_or_workload.name
    else:
        q, a = spec_or_workload
        name = ""
    tasks = []
    for v in values:
        try:
            cfg = base_cfg.replace(**{field_name: int(v)})
        except Exception as exc:
            tasks.append(exc)
            continue
        tasks.append((q, a, cfg, table, method, int(v)))

    workers = workers or default_workers()
    runnable = [t for t in tasks if not isinstance(t, Exception)]
    if workers > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = iter(pool.map(_point_task, runnable))
    else:
        done = iter(map(_point_task, runnable))

    result = SweepResult(field_name, [int(v) for v in values], benchmark=name)
    reference = None
    for v, t in zip(values, tasks):
        if isinstance(t, Exception):
            result.points.append(SweepPoint(int(v), error=f"{type(t).__name__}: {t}"))
            continue
        point, out = next(done)
        if out is not None:
            if reference is None:
                reference = out
            elif out != reference:
                raise AssertionError(f"output changed at {field_name}={v}; timing parameters must not alter values")
        result.points.append(point)
    return result


def compare_runs(results) -> list:
    """Join sweep results into rows with speedup relative to the first point."""
    results = list(results)
    if not results:
        raise ValueError("no results to compare")
    axis = results[0].axis
    if any(r.axis != axis for r in results):
        raise ValueError("sweep results use different axes")
    rows = []
    for r in results:
        ok = [p for p in r.points if not p.error]
        base = ok[0].cycles if ok else 0
        for p in r.points:
            speedup = base / p.cycles if (not p.error and p.cycles) else float("nan")
            rows.append({
                "benchmark": r.benchmark,
                axis: p.value,
                "cycles": p.cycles,
                "efficiency": p.efficiency,
                "speedup": speedup,
                "error": p.error,
            })
    return rows
