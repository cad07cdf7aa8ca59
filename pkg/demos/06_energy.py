"""
Where the energy goes
=====================

Price the simulator's event counts and compare with fetching a dense
32-bit model from DRAM.
"""

from eie import SimConfig, encode_interleaved, estimate_energy, savings_decomposition, simulate
from eie.bench import generate_synthetic, preset

spec = preset("Alex-8", seed=0)
q, a = generate_synthetic(spec)
cfg = SimConfig(n_pe=64)
_, stats = simulate(encode_interleaved(q, 64), q.codebook, a, cfg)
report = estimate_energy(stats, cfg)

for name, joules in report.categories().items():
    print(f"{name:14s} {joules * 1e9:9.2f} nJ")
print(f"{'total':14s} {report.total * 1e9:9.2f} nJ")
print(f"same weight bits from DRAM: {report.dram_weight_fetch / report.weight_fetch:.0f}x the SRAM cost")
print(f"dense 32-bit model from DRAM: {report.uncompressed_dram_weight_fetch * 1e6:.1f} uJ")

# %%
# The first-order saving multiplies four independent factors.
s = savings_decomposition(spec.weight_density, spec.activation_density, 4)
print(s.as_dict())
print(savings_decomposition(0.1, 1 / 3, 4).product)
