"""
Simulating the PE array
=======================

Simulate one scaled-down benchmark layer cycle by cycle and read the
statistics.
"""

from eie import SimConfig, encode_interleaved, load_efficiency, simulate, spmv_compressed, theoretical_cycles
from eie.bench import generate_synthetic, preset

spec = preset("Alex-7", seed=0).scaled(1024, 1024)
q, a = generate_synthetic(spec)
cfg = SimConfig(n_pe=16)
e = encode_interleaved(q, cfg.n_pe)

out, stats = simulate(e, q.codebook, a, cfg)
assert out == spmv_compressed(e, q.codebook, a)

theo, _ = theoretical_cycles(e, a, cfg)
per_pe, eff = load_efficiency(stats)
print(f"cycles {stats.total_cycles} (balanced bound {theo:.0f}, ratio {stats.total_cycles / theo:.3f})")
print(f"load efficiency {eff:.3f}; worst PE {per_pe.min():.3f}, best {per_pe.max():.3f}")
print(f"MACs {stats.mac_count} of which padding {stats.padding_mac_count}")
print(f"sparse-matrix SRAM row reads {stats.spmat_sram_row_reads}, pointer reads {stats.ptr_sram_reads}")
print(f"{stats.seconds * 1e6:.2f} us at {cfg.clock_mhz:.0f} MHz")

# %%
# The cycle-stepped state machine gives the same numbers as the default
# recurrence, only slower.
_, slow = simulate(e, q.codebook, a, cfg, method="cycle")
print("cycle == event:", slow == stats)
