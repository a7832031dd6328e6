import time

import numpy as np

from convsel.rng import RandomStream
from convsel.training import fit_critic

t0 = time.time()
DIM = 512
results = {}
for m in (0.0, 1.0, 2.0):
    per_seed = []
    for seed in range(5):
        rng = RandomStream(seed, f"gauss/{m}")
        n = 384
        s = np.zeros((n, DIM))
        t = np.zeros((n, DIM))
        s[:, 0] = rng.normal(0.0, 1.0, (n,))
        t[:, 0] = rng.normal(m, 1.0, (n,))
        _, obj = fit_critic(s, t, hidden=512, clip=0.01, steps=200, batch_size=32,
                            alpha=0.005, seed=seed, name=f"m{m}")
        per_seed.append(-obj if m else obj)  # source minus target: sign flips with shift direction
        print(f"m={m} seed={seed} obj={obj:+.4f}  ({time.time()-t0:.0f}s)")
    results[m] = sorted(per_seed)[2]
print("medians:", results, f"total {time.time()-t0:.0f}s")
