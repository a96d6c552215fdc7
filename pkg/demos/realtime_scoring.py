"""Fit once, save the fit, then score incoming rows in chunks.

Mirrors ``rtdetmcd fit`` followed by repeated ``rtdetmcd score`` calls.
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from rtdetmcd import fit_serial, flag
from rtdetmcd.io import read_fit, write_fit
from rtdetmcd.simulation import gaussian_sample, gen_sigma_a09

rng = np.random.default_rng(5)
p = 4
sigma = gen_sigma_a09(p)
fit = fit_serial(gaussian_sample(50_000, sigma, rng))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.fit.json"
    write_fit(path, fit)
    stored = read_fit(path)

assert np.array_equal(stored.scatter_rew, fit.scatter_rew)

for chunk in range(3):
    Y = gaussian_sample(1_000_000, sigma, rng)
    Y[:100] += 10  # a few anomalies per chunk
    t0 = time.perf_counter()
    report = flag(Y, stored)
    dt = time.perf_counter() - t0
    print(f"chunk {chunk}: {len(Y) / dt:.3g} rows/s, {report.n_outliers} flagged, "
          f"{report.flags[:100].sum()} of 100 planted anomalies caught")
