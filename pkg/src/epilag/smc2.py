"""SMC sampler over static parameters with filter-estimated likelihoods.

Each of N samples carries a parameter hypothesis theta and the marginal
log-likelihood estimated by a full fixed-lag filter run. Iterations move
samples by a reflected Gaussian random walk; with the forwards-proposal
L-kernel the L/q factor cancels and the weight update reduces to the ratio
of (prior x estimated likelihood) at the new and cached positions.
Systematic resampling triggers when the sampler-level ESS drops below N/2,
and the final estimate recycles every iteration's weighted mean with
weights proportional to the iteration ESS.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from . import rng as streams
from .buffer import MeasurementBuffer
from .exceptions import ConfigError, DegeneracyError, InputError
from .filters import FilterConfig, log_sum_exp, run_filter
from .model import PARAM_NAMES, Theta

# Flat priors over plausible epidemic rates, containing the simulation
# truths used throughout: beta0, beta1, gamma, sigma, xi.
DEFAULT_PRIOR_LOW = np.zeros(5)
DEFAULT_PRIOR_HIGH = np.array([0.5, 1.0, 0.5, 0.5, 0.05])


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform prior box over the five rate parameters."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        lows = np.asarray(self.lows, dtype=float)
        highs = np.asarray(self.highs, dtype=float)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        if lows.shape != (5,) or highs.shape != (5,):
            raise ConfigError("prior bounds must each have 5 entries")
        if np.any(highs < lows):
            raise ConfigError("prior upper bounds below lower bounds")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lows, self.highs, size=(n, 5))

    def log_density(self, theta_arr: np.ndarray) -> float:
        """0 inside the box, -inf outside; the uniform constant cancels in
        every ratio this is used for."""
        inside = np.all((theta_arr >= self.lows) & (theta_arr <= self.highs))
        return 0.0 if inside else -np.inf


def default_prior() -> PriorSpec:
    return PriorSpec(DEFAULT_PRIOR_LOW.copy(), DEFAULT_PRIOR_HIGH.copy())


@dataclass(frozen=True)
class ThetaSample:
    theta: Theta
    log_weight: float
    log_likelihood: float


@dataclass(frozen=True)
class Smc2Config:
    n_samples: int
    n_iterations: int
    prior: PriorSpec
    stepsizes: np.ndarray
    filter_config: FilterConfig
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stepsizes", np.asarray(self.stepsizes, dtype=float))
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be >= 1")
        if self.stepsizes.shape != (5,) or np.any(self.stepsizes <= 0):
            raise ConfigError("stepsizes must be 5 positive values")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def rw_propose(theta: Theta, stepsizes, rng: np.random.Generator) -> Theta:
    """Gaussian random-walk move, reflected at zero so rates stay positive.

    Draw order: one standard normal vector of five.
    """
    step = np.asarray(stepsizes, dtype=float)
    if np.any(step <= 0):
        raise ConfigError("stepsizes must be positive")
    return Theta.from_array(np.abs(theta.as_array() + rng.normal(size=5) * step))


def log_lq_correction(theta_prev: np.ndarray, theta_new: np.ndarray, stepsizes) -> float:
    """log L(theta_prev | theta_new) - log q(theta_new | theta_prev).

    The reflected-at-zero Gaussian walk has density
    phi(y - x) + phi(y + x) per component, which is symmetric in (x, y), so
    the forwards-proposal L-kernel makes this identically zero. Kept as an
    explicit computation so the cancellation is verifiable.
    """
    step = np.asarray(stepsizes, dtype=float)

    def log_q(y, x):
        return float(np.sum(np.logaddexp(norm.logpdf(y, loc=x, scale=step),
                                         norm.logpdf(y, loc=-x, scale=step))))

    return log_q(np.asarray(theta_prev), np.asarray(theta_new)) - \
        log_q(np.asarray(theta_new), np.asarray(theta_prev))


def weight_update(sample_prev: ThetaSample, sample_new: ThetaSample,
                  prior: PriorSpec) -> float:
    """Eq-style sampler weight: w_prev * pi(theta_new) / pi(theta_prev) with
    pi = prior x estimated likelihood. A zero weight stays zero (0 times any
    ratio), which keeps dead samples dead until resampling replaces them.
    """
    if sample_prev.log_weight == -np.inf:
        return -np.inf
    log_pi_new = prior.log_density(sample_new.theta.as_array()) + sample_new.log_likelihood
    if not np.isfinite(log_pi_new):
        return -np.inf
    log_pi_prev = prior.log_density(sample_prev.theta.as_array()) + sample_prev.log_likelihood
    if not np.isfinite(log_pi_prev):
        return -np.inf
    return sample_prev.log_weight + log_pi_new - log_pi_prev


def normalize_theta_weights(log_weights: np.ndarray) -> tuple[np.ndarray, float]:
    lse = log_sum_exp(log_weights)
    if not np.isfinite(lse):
        raise DegeneracyError("all parameter-sample weights are zero",
                              {"n_samples": len(log_weights)})
    w = np.exp(log_weights - lse)
    w /= w.sum()
    return w, float(1.0 / np.sum(w * w))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Offspring indices from a single uniform offset u ~ U[0, 1/N).

    Offspring counts are guaranteed within floor/ceil of N * weight.
    """
    n = len(weights)
    positions = (rng.uniform(0.0, 1.0 / n) + np.arange(n) / n)
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    ess: float
    resampled: bool
    theta_hat: np.ndarray           # (5,) weighted mean of this iteration


def estimate_theta(history: list[IterationRecord]) -> np.ndarray:
    """Recycled posterior mean: per-iteration means combined with weights
    proportional to each iteration's ESS."""
    if not history:
        raise InputError("no completed iterations to estimate from")
    ess = np.array([rec.ess for rec in history])
    coef = ess / ess.sum()
    return np.sum(coef[:, None] * np.stack([rec.theta_hat for rec in history]), axis=0)


@dataclass
class Smc2Result:
    iterations: list[IterationRecord]
    recycled_theta: np.ndarray
    final_thetas: np.ndarray        # (N, 5) last iteration, before its resample
    final_weights: np.ndarray       # (N,) normalized
    final_log_liks: np.ndarray
    diagnostics: dict

    ITER_HEADER = ["k", "ess_theta", "resampled", "beta0_hat", "beta1_hat",
                   "gamma_hat", "sigma_hat", "xi_hat"]
    POSTERIOR_HEADER = list(PARAM_NAMES) + ["weight", "log_likelihood"]

    def write_iterations_csv(self, path, comments: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for key, value in (comments or {}).items():
                fh.write(f"# {key}={value}\n")
            writer = csv.writer(fh)
            writer.writerow(self.ITER_HEADER)
            for rec in self.iterations:
                writer.writerow([rec.k, repr(rec.ess), int(rec.resampled),
                                 *(repr(float(v)) for v in rec.theta_hat)])

    def write_posterior_csv(self, path, comments: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for key, value in (comments or {}).items():
                fh.write(f"# {key}={value}\n")
            writer = csv.writer(fh)
            writer.writerow(self.POSTERIOR_HEADER)
            for i in range(len(self.final_weights)):
                writer.writerow([*(repr(float(v)) for v in self.final_thetas[i]),
                                 repr(float(self.final_weights[i])),
                                 repr(float(self.final_log_liks[i]))])


def _filter_log_lik(config: Smc2Config, theta_arr: np.ndarray, k: int, i: int,
                    buffer: MeasurementBuffer, horizon: int) -> float:
    """Marginal log-likelihood estimate for one sample's parameter draw.

    Each (iteration, sample) runs its own filter stream, so the estimates
    are independent even for identical parameters.
    """
    fc = replace(config.filter_config, theta=Theta.from_array(theta_arr),
                 seed=streams.derive_seed(config.seed, streams.SMC_FILTER, k, i))
    try:
        return run_filter(fc, buffer, horizon).log_likelihood
    except DegeneracyError:
        return -np.inf


def init_samples(config: Smc2Config, buffer: MeasurementBuffer,
                 horizon: int) -> list[ThetaSample]:
    """Draw theta from the prior and weight by the estimated likelihood
    (prior terms cancel when the initial proposal is the prior)."""
    rng = streams.substream(config.seed, streams.SMC_INIT)
    thetas = config.prior.sample(rng, config.n_samples)
    out = []
    for i in range(config.n_samples):
        ll = _filter_log_lik(config, thetas[i], 1, i, buffer, horizon)
        out.append(ThetaSample(Theta.from_array(thetas[i]), ll, ll))
    return out


def run_smc2(config: Smc2Config, buffer: MeasurementBuffer, horizon: int) -> Smc2Result:
    """K iterations of propose -> filter -> weight -> normalize -> resample.

    The replay buffer is shared by every inner filter run (its queries are
    read-only apart from idempotent dropped-measurement bookkeeping).
    """
    n, prior = config.n_samples, config.prior
    samples = init_samples(config, buffer, horizon)
    history: list[IterationRecord] = []
    ess_trace = []
    finite_frac = []
    final_state = None

    for k in range(1, config.n_iterations + 1):
        if k > 1:
            noise = streams.substream(config.seed, streams.SMC_PROPOSE, k).normal(size=(n, 5))
            moved = []
            for i, prev in enumerate(samples):
                if prev.log_weight == -np.inf:
                    moved.append(prev)  # dead: weight cannot revive, skip the filter run
                    continue
                theta_arr = np.abs(prev.theta.as_array() + noise[i] * config.stepsizes)
                if prior.log_density(theta_arr) == -np.inf:
                    moved.append(ThetaSample(prev.theta, -np.inf, prev.log_likelihood))
                    continue
                ll = _filter_log_lik(config, theta_arr, k, i, buffer, horizon)
                new = ThetaSample(Theta.from_array(theta_arr), 0.0, ll)
                moved.append(ThetaSample(new.theta, weight_update(prev, new, prior), ll))
            samples = moved

        log_w = np.array([s.log_weight for s in samples])
        weights, ess = normalize_theta_weights(log_w)
        thetas = np.stack([s.theta.as_array() for s in samples])
        theta_hat = weights @ thetas
        resample_now = ess < n / 2
        history.append(IterationRecord(k, ess, bool(resample_now), theta_hat))
        ess_trace.append(ess)
        finite_frac.append(float(np.mean(np.isfinite(log_w))))
        if k == config.n_iterations:
            final_state = (thetas.copy(), weights.copy(),
                           np.array([s.log_likelihood for s in samples]))
        if resample_now:
            idx = systematic_resample(weights,
                                      streams.substream(config.seed, streams.SMC_RESAMPLE, k))
            samples = [ThetaSample(samples[j].theta, -math.log(n), samples[j].log_likelihood)
                       for j in idx]

    final_thetas, final_weights, final_lls = final_state
    return Smc2Result(
        iterations=history,
        recycled_theta=estimate_theta(history),
        final_thetas=final_thetas,
        final_weights=final_weights,
        final_log_liks=final_lls,
        diagnostics={"ess_trace": ess_trace, "finite_weight_fraction": finite_frac},
    )
