import time
import numpy as np
from epilag import (FilterConfig, MeasurementBuffer, RegimeMatrix, SimConfig,
                    Theta, simulate_dataset)
from epilag.smc2 import Smc2Config, default_prior, run_smc2

truth = np.array([0.1, 0.3, 0.05, 0.08, 0.005])
theta = Theta(*truth)
M = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
grids = {
    "A travel": [0.02, 0.04, 0.01, 0.015, 0.002],
    "B mid   ": [0.01, 0.02, 0.005, 0.008, 0.001],
    "C fine  ": [0.005, 0.01, 0.0025, 0.004, 0.0005],
}
for name, steps in grids.items():
    t0 = time.perf_counter()
    for seed in (1, 2):
        sim = SimConfig(n_pop=10000, horizon=365, burn_in=150, theta_true=theta,
                        regime_schedule=[(180, 280)], seed=seed)
        _, _, ms = simulate_dataset(sim)
        buf = MeasurementBuffer.from_measurements(ms)
        inner = FilterConfig(n_particles=256, lag=0, n_pop=10000, theta=theta,
                             regime_matrix=M, seed=0)
        cfg = Smc2Config(n_samples=64, n_iterations=10, prior=default_prior(),
                         stepsizes=steps, filter_config=inner, seed=seed)
        res = run_smc2(cfg, buf, 365)
        ratio = res.recycled_theta / truth
        ok = bool(np.all((ratio >= 0.5) & (ratio <= 1.5)) and
                  res.recycled_theta[1] > res.recycled_theta[0])
        print(f"{name} seed {seed}: ratio {np.array2string(ratio, precision=2)} "
              f"{'PASS' if ok else 'FAIL'} ess {[round(e) for e in res.diagnostics['ess_trace']]}",
              flush=True)
    print(f"{name}: {time.perf_counter()-t0:.0f}s", flush=True)
