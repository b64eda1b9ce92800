import time
import numpy as np
from epilag import (FilterConfig, MeasurementBuffer, RegimeMatrix, SimConfig,
                    Theta, simulate_dataset)
from epilag.smc2 import Smc2Config, default_prior, run_smc2

truth = np.array([0.1, 0.3, 0.05, 0.08, 0.005])
theta = Theta(*truth)
M = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
grids = {
    "S1": [0.02, 0.08, 0.015, 0.02, 0.004],
    "S2": [0.03, 0.10, 0.02, 0.03, 0.006],
    "S3": [0.02, 0.06, 0.01, 0.015, 0.003],
    "S4": [0.04, 0.12, 0.025, 0.035, 0.008],
    "S5": [0.015, 0.05, 0.0075, 0.012, 0.002],
}
buffers = {}
for seed in (1, 2, 3):
    sim = SimConfig(n_pop=10000, horizon=365, burn_in=150, theta_true=theta,
                    regime_schedule=[(180, 280)], seed=seed)
    _, _, ms = simulate_dataset(sim)
    buffers[seed] = MeasurementBuffer.from_measurements(ms)
for name, steps in grids.items():
    t0 = time.perf_counter()
    msgs = []
    for seed in (1, 2, 3):
        inner = FilterConfig(n_particles=96, lag=0, n_pop=10000, theta=theta,
                             regime_matrix=M, seed=0)
        cfg = Smc2Config(n_samples=64, n_iterations=10, prior=default_prior(),
                         stepsizes=steps, filter_config=inner, seed=seed)
        res = run_smc2(cfg, buffers[seed], 365)
        ratio = res.recycled_theta / truth
        ok = bool(np.all((ratio >= 0.5) & (ratio <= 1.5)) and
                  res.recycled_theta[1] > res.recycled_theta[0])
        msgs.append(f"  seed {seed}: {'PASS' if ok else 'FAIL'} ratio {np.array2string(ratio, precision=2)} "
                    f"ess {[round(e) for e in res.diagnostics['ess_trace']]}")
    print(f"{name} ({time.perf_counter()-t0:.0f}s):", flush=True)
    for msg in msgs:
        print(msg, flush=True)
