"""
From a dense layer to interleaved CSC
=====================================

Prune a random layer, share its weights through a 16-entry codebook and
lay the result out for a small PE array.
"""

import numpy as np

from eie import compress, decode, encode_interleaved, padding_stats, validate

rng = np.random.default_rng(0)
w = rng.normal(scale=0.5, size=(32, 24))

# keep the largest 10% of weights, cluster them into 15 shared values
q = compress(w, 0.10)
print(f"kept {q.nnz} of {w.size} weights, density {q.density:.3f}")
print("codebook:", np.round(q.codebook.values, 3))

# %%
# Interleave the rows over 4 PEs. PE k owns rows k, k+4, k+8, ...
# Each PE stores a 4-bit index ``v`` and a 4-bit zero count ``z`` per entry,
# plus one 16-bit pointer per column.
e = encode_interleaved(q, 4)
for k, s in enumerate(e.slices):
    print(f"PE{k}: {s.n_entries:3d} entries, first column v={s.column(0)[0].tolist()} z={s.column(0)[1].tolist()}")

# %%
# A gap of more than 15 local zeros needs a padding entry. Here every PE
# owns 8 rows, so no gap can reach 16.
print("padding per PE:", padding_stats(e)[0])
print("violations:", validate(e))
assert decode(e) == q

# %%
# The same matrix on one PE has 32-row columns, so long gaps appear.
one = encode_interleaved(q, 1)
print("padding on 1 PE:", padding_stats(one)[1])
