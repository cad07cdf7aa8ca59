"""Compressed sparse fully-connected inference: compression, encoding,
fixed-point reference arithmetic, a cycle-level PE-array simulator and an
event-count energy model."""

from .compress import (
    Codebook,
    QuantizedSparseMatrix,
    build_codebook,
    compress,
    dequantize,
    dequantize_raw,
    prune_magnitude,
    quantize,
)
from .csc import (
    InterleavedCsc,
    PeSlice,
    TiledCsc,
    decode,
    decode_interleaved,
    encode,
    encode_interleaved,
    encode_tiled,
    padding_stats,
    validate,
)
from .cyclesim import SimConfig, SimStats, lnzd_scan, load_efficiency, simulate, theoretical_cycles
from .energy import EnergyTable, estimate_energy, savings_decomposition
from .engine import count_work, run_network, spmv_compressed, spmv_dense_oracle
from .fixedpoint import ActivationVector, FixedPointFormat, Q8_8, quantize_activations

__version__ = "0.1.0"
