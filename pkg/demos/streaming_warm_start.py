"""Refit a stream of batches, warm-starting each fit from the previous one.

A warm start replaces the two deterministic starts with the previous
estimate, so each batch needs a single concentration run.
"""

import time

import numpy as np

from rtdetmcd import ParallelConfig, destandardized_fit, fit_parallel
from rtdetmcd.simulation import contaminate, gaussian_sample, gen_sigma_a09

rng = np.random.default_rng(3)
p = 4
sigma = gen_sigma_a09(p)
config = ParallelConfig(q_override=4, seed=0)

prev = None
for batch in range(5):
    # slow drift of the location between batches
    X = gaussian_sample(2**16, sigma, rng, center=np.full(p, 0.1 * batch))
    X, _ = contaminate(X, sigma, "point", 0.1, 50, rng)
    t0 = time.perf_counter()
    fit, report = fit_parallel(X, config, warm_start=prev)
    dt = time.perf_counter() - t0
    center, _ = destandardized_fit(fit)
    print(f"batch {batch}: {dt * 1e3:6.1f} ms, start={'warm' if prev else 'cold'}, "
          f"center[0]={center[0]:.3f}, flagged={report.n_outliers}")
    prev = fit
