"""Fixed-lag particle filtering for epidemic outbreak detection.

A sequential Monte Carlo toolkit that tracks a regime-switched stochastic
SEIRS model from multiple, possibly delayed, surveillance streams. The
fixed-lag filter re-simulates each particle's recent trajectory so
out-of-sequence measurements revise both state and outbreak-regime
estimates; an SMC sampler over the static rates uses the filter's marginal
likelihood for parameter estimation.
"""

from .buffer import MeasurementBuffer
from .datagen import (Measurement, SensorConfig, SimConfig,
                      generate_measurements, random_outbreak_schedule,
                      simulate_dataset, simulate_truth)
from .exceptions import (ConfigError, DegeneracyError, EpilagError,
                         IngestionError, InputError, ParameterError,
                         UndefinedRateError)
from .filters import (FilterConfig, FilterOutput, ParticleCloud,
                      init_particles, multinomial_resample, normalize_and_ess,
                      reference_pf, run_filter)
from .metrics import EvalSeries, amoc, mse, roc, summarize
from .model import (RegimeMatrix, SeirsState, Theta, obs_log_density,
                    regime_step, seirs_step, transition_probs)
from .smc2 import (PriorSpec, Smc2Config, Smc2Result, ThetaSample,
                   estimate_theta, run_smc2, rw_propose, systematic_resample,
                   weight_update)

__version__ = "0.1.0"
