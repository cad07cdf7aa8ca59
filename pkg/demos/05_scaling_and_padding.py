"""
Scaling the PE count
====================

More PEs split the rows more finely. Work per PE shrinks, zero runs in
each slice get shorter and padding disappears once a PE owns 16 rows or
fewer.
"""

from eie import SimConfig
from eie.bench import compare_runs, preset, sweep

spec = preset("VGG-7", seed=2).scaled(in_dim=1024)  # keeps the 4096 output rows
result = sweep(spec, SimConfig(), "n_pe", [16, 32, 64, 128, 256])

print("PEs  padding  efficiency  speedup")
for row, p in zip(compare_runs([result]), result.points):
    print(f"{p.value:4d}  {p.padding:7d}  {p.efficiency:10.3f}  {row['speedup']:7.2f}")

# %%
# Speedups above the PE ratio come from two effects. At 16 and 32 PEs each
# PE owns more than 64 output rows, so the layer runs in several output
# batches that re-stream the input. Padding entries also cost a MAC and
# vanish as slices shorten.

# %%
# A short, wide layer behaves differently: with 600 rows each of 64 PEs
# gets about one entry per column and the array spends much of its time
# starved.
nt = sweep(preset("NT-We", seed=2), SimConfig(), "n_pe", [64])
print(f"NT-We at 64 PEs: efficiency {nt.points[0].efficiency:.3f}")
