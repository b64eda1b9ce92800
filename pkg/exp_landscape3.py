import numpy as np
from epilag import (FilterConfig, MeasurementBuffer, RegimeMatrix, SimConfig,
                    Theta, simulate_dataset)
from epilag.filters import run_filter

truth = np.array([0.1, 0.3, 0.05, 0.08, 0.005])
M = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])

for n_pop, sched in ((2000, (180, 240)), (1000, (180, 240))):
    sim = SimConfig(n_pop=n_pop, horizon=365, burn_in=150, theta_true=Theta(*truth),
                    regime_schedule=[sched], seed=1)
    _, _, ms = simulate_dataset(sim)
    buf = MeasurementBuffer.from_measurements(ms)

    def ll_med(theta_arr, reps=3, base=900):
        vals = []
        for r in range(reps):
            fc = FilterConfig(n_particles=2048, lag=0, n_pop=n_pop,
                              theta=Theta.from_array(theta_arr), regime_matrix=M,
                              seed=base + r)
            vals.append(run_filter(fc, buf, 365).log_likelihood)
        return float(np.median(vals))

    base_ll = ll_med(truth)
    print(f"--- N_pop {n_pop} {sched}: truth ll {base_ll:.1f} (Nx=2048) ---", flush=True)
    names = ["beta0", "beta1", "gamma", "sigma", "xi"]
    for p in range(5):
        row = []
        for f in (0.5, 1.5):
            theta = truth.copy()
            theta[p] *= f
            row.append(f"x{f}: {ll_med(theta) - base_ll:+8.1f}")
        print(f"{names[p]:6s} {'  '.join(row)}", flush=True)
