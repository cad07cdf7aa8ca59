"""Event-count energy estimate.

Per-event energies default to 45 nm figures (pJ): 32-bit int add 0.1,
float add 0.9, int mult 3.1, float mult 3.7, 32-bit read from a 32 KB
SRAM 5, 32-bit DRAM read 640. SRAM reads wider than 32 bits default to
a linear scaling of the 32-bit cost; that scaling is a placeholder and
can be replaced through ``sram_read_pj``.

Register-file accesses are priced as 32-bit SRAM reads.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .cyclesim import SimConfig, SimStats
from .errors import ConfigurationError

PJ = 1e-12
SRAM_VS_DRAM = 120.0  # system-level saving from keeping the model on chip


def _linear_widths(base_pj: float) -> dict:
    return {w: base_pj * w / 32 for w in (8, 16, 32, 64, 128, 256, 512, 1024)}


@dataclass
class EnergyTable:
    int_add: float = 0.1
    float_add: float = 0.9
    int_mult: float = 3.1
    float_mult: float = 3.7
    sram_read_32b: float = 5.0
    dram_read_32b: float = 640.0
    sram_read_pj: dict = field(default=None)

    def __post_init__(self):
        if self.sram_read_pj is None:
            self.sram_read_pj = _linear_widths(self.sram_read_32b)
        self.sram_read_pj = {int(k): float(v) for k, v in self.sram_read_pj.items()}
        for name in ("int_add", "float_add", "int_mult", "float_mult", "sram_read_32b", "dram_read_32b"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if any(v <= 0 for v in self.sram_read_pj.values()):
            raise ConfigurationError("SRAM read energies must be positive")

    def sram_read(self, width_bits: int) -> float:
        if width_bits == 32:
            return self.sram_read_32b
        try:
            return self.sram_read_pj[int(width_bits)]
        except KeyError:
            raise ConfigurationError(f"no SRAM read energy for width {width_bits} bits") from None

    @classmethod
    def from_mapping(cls, m: dict) -> "EnergyTable":
        """Override defaults from ``{event: pJ}``.

        Width-specific SRAM reads use keys ``sram_read_<bits>b``.
        """
        kw, widths = {}, {}
        known = {f for f in cls.__dataclass_fields__ if f != "sram_read_pj"}
        for key, val in m.items():
            if key in known:
                kw[key] = float(val)
            elif key.startswith("sram_read_") and key.endswith("b") and key[10:-1].isdigit():
                widths[int(key[10:-1])] = float(val)
            else:
                raise ConfigurationError(f"unknown energy event {key!r}")
        table = cls(**kw)
        table.sram_read_pj.update(widths)
        return table

    @classmethod
    def load(cls, path) -> "EnergyTable":
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))


@dataclass
class EnergyReport:
    weight_fetch: float
    pointer_fetch: float
    activation: float
    arithmetic: float
    dram_weight_fetch: float
    uncompressed_dram_weight_fetch: float
    inferences: int = 1

    @property
    def total(self) -> float:
        return self.weight_fetch + self.pointer_fetch + self.activation + self.arithmetic

    @property
    def per_inference(self) -> float:
        return self.total / self.inferences

    def categories(self) -> dict:
        return {
            "weight_fetch": self.weight_fetch,
            "pointer_fetch": self.pointer_fetch,
            "activation": self.activation,
            "arithmetic": self.arithmetic,
        }

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        d["per_inference"] = self.per_inference
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        d = self.as_dict()
        keys = sorted(d)
        return ",".join(keys) + "\n" + ",".join(repr(d[k]) for k in keys) + "\n"


def estimate_energy(s: SimStats, cfg: SimConfig, t: EnergyTable | None = None) -> EnergyReport:
    """Energy in joules from simulator event counts."""
    t = t or EnergyTable()
    width = cfg.sram_width_bits
    row_pj = t.sram_read(width)
    word_pj = t.sram_read(32)
    weight = s.spmat_sram_row_reads * row_pj
    pointer = s.ptr_sram_reads * word_pj
    act = s.act_accesses * word_pj
    arith = s.mac_count * (t.int_mult + t.int_add)
    # same bits streamed from DRAM in 32-bit words
    dram = s.spmat_sram_row_reads * (width / 32) * t.dram_read_32b
    dense = s.rows * s.cols * t.dram_read_32b
    return EnergyReport(weight * PJ, pointer * PJ, act * PJ, arith * PJ, dram * PJ, dense * PJ)


@dataclass(frozen=True)
class Savings:
    sram_vs_dram: float
    pruning: float
    weight_width: float
    act_sparsity: float

    @property
    def product(self) -> float:
        return math.prod((self.sram_vs_dram, self.pruning, self.weight_width, self.act_sparsity))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["product"] = self.product
        return d


def savings_decomposition(weight_density: float, act_density: float, bits_per_weight: int) -> Savings:
    """Multiplicative energy saving over a dense 32-bit DRAM-resident model."""
    if not 0 < weight_density <= 1 or not 0 < act_density <= 1:
        raise ValueError("densities must be in (0, 1]")
    if not 1 <= bits_per_weight <= 32:
        raise ValueError("bits_per_weight must be in 1..32")
    return Savings(SRAM_VS_DRAM, 1 / weight_density, 32 / bits_per_weight, 1 / act_density)
