import sys
import time

import numpy as np

from epilag import (FilterConfig, MeasurementBuffer, RegimeMatrix, SimConfig,
                    Theta, simulate_dataset)
from epilag.smc2 import Smc2Config, default_prior, run_smc2

truth = np.array([0.1, 0.3, 0.05, 0.08, 0.005])
theta = Theta(*truth)
M = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
t0 = time.perf_counter()
for lag in (0, 3):
    print(f"=== lag {lag} ===", flush=True)
    for seed in range(1, 6):
        sim = SimConfig(n_pop=10000, horizon=365, burn_in=150, theta_true=theta,
                        regime_schedule=[(180, 280)], seed=seed)
        _, _, ms = simulate_dataset(sim)
        buf = MeasurementBuffer.from_measurements(ms)
        inner = FilterConfig(n_particles=256, lag=lag, n_pop=10000, theta=theta,
                             regime_matrix=M, seed=0)
        cfg = Smc2Config(n_samples=64, n_iterations=10, prior=default_prior(),
                         stepsizes=[0.01, 0.02, 0.005, 0.008, 0.0005],
                         filter_config=inner, seed=seed)
        res = run_smc2(cfg, buf, 365)
        est = res.recycled_theta
        ratio = est / truth
        ok = bool(np.all((ratio >= 0.5) & (ratio <= 1.5)) and est[1] > est[0])
        print(f"seed {seed}: est {np.array2string(est, precision=4)} "
              f"ratio {np.array2string(ratio, precision=2)} "
              f"{'PASS' if ok else 'FAIL'} "
              f"ess {[round(e) for e in res.diagnostics['ess_trace']]}", flush=True)
print(f"{time.perf_counter() - t0:.0f}s total", flush=True)
