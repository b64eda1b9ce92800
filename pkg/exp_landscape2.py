import numpy as np
from epilag import (FilterConfig, MeasurementBuffer, RegimeMatrix, SimConfig,
                    Theta, simulate_dataset)
from epilag.filters import run_filter

truth = np.array([0.1, 0.3, 0.05, 0.08, 0.005])
M = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
sim = SimConfig(n_pop=1000, horizon=365, burn_in=150, theta_true=Theta(*truth),
                regime_schedule=[(180, 240)], seed=1)
_, _, ms = simulate_dataset(sim)
buf = MeasurementBuffer.from_measurements(ms)

def ll_med(theta_arr, reps=5, base=500):
    vals = []
    for r in range(reps):
        fc = FilterConfig(n_particles=256, lag=0, n_pop=1000,
                          theta=Theta.from_array(theta_arr), regime_matrix=M,
                          seed=base + r)
        vals.append(run_filter(fc, buf, 365).log_likelihood)
    return float(np.median(vals))

base_ll = ll_med(truth)
print(f"truth ll (median of 5): {base_ll:.1f}", flush=True)
names = ["beta0", "beta1", "gamma", "sigma", "xi"]
for p in range(5):
    for f in (0.5, 1.5):
        theta = truth.copy()
        theta[p] *= f
        print(f"{names[p]} x{f}: {ll_med(theta) - base_ll:+9.1f}", flush=True)
