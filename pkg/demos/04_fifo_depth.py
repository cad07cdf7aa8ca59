"""
How deep should the activation queue be?
========================================

Sweep the per-PE FIFO depth on the Alex-6 layer shape at 64 PEs.
"""

from eie import SimConfig
from eie.bench import preset, sweep

result = sweep(preset("Alex-6", seed=1), SimConfig(n_pe=64), "fifo_depth", [1, 2, 4, 8, 16, 32, 64, 128, 256])

print("depth  efficiency  cycles")
for p in result.points:
    print(f"{p.value:5d}  {p.efficiency:10.3f}  {p.cycles:6d}")

# %%
# With a single slot every PE waits for the slowest one on each column, so
# about half the cycles are bubbles. Past a depth of 8 the gain is small.
