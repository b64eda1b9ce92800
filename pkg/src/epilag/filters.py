"""Markov-switching particle filter and its fixed-lag generalisation.

Each fixed-lag particle holds a block of the last lag+1 (state, regime)
days plus an anchor at the day before the block. Every step re-proposes the
whole block from the anchor through the dynamics, so measurements received
late but still inside the window revise both state and regime history. The
weight update keeps only the observation terms and the regime
target-vs-proposal correction: states are proposed from the dynamics and
the backward kernel is chosen to match the proposal, so all dynamics terms
cancel. With lag 0 the algorithm reduces exactly to a standard particle
filter, which `reference_pf` implements independently as a cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as streams
from .buffer import MeasurementBuffer
from .exceptions import ConfigError, DegeneracyError, InputError
from .model import (LAMBDA_FLOOR, RegimeMatrix, SeirsState, Theta,
                    apply_flows, poisson_log_pmf, regime_step_vec,
                    seirs_flows_vec, seirs_step_probs_vec)


def log_sum_exp(log_values: np.ndarray) -> float:
    """Max-shifted log-sum-exp of a 1-D array; -inf when all terms vanish.

    Local implementation: this sits on the per-day hot path and the scipy
    wrapper's dispatch overhead dominates at small particle counts.
    """
    m = np.max(log_values)
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.sum(np.exp(log_values - m))))


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int
    lag: int
    n_pop: int
    theta: Theta
    regime_matrix: RegimeMatrix
    proposal_matrix: RegimeMatrix | None = None   # None: propose regimes from regime_matrix
    ess_threshold_fraction: float = 0.5
    lambda_floor: float = LAMBDA_FLOOR
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError("n_particles must be >= 2")
        if self.lag < 0:
            raise ConfigError("lag must be >= 0")
        if self.n_pop <= 0:
            raise ConfigError("n_pop must be positive")
        if not (0 < self.ess_threshold_fraction <= 1):
            raise ConfigError("ess_threshold_fraction must be in (0, 1]")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def proposal(self) -> RegimeMatrix:
        return self.proposal_matrix if self.proposal_matrix is not None else self.regime_matrix


@dataclass(frozen=True)
class Particle:
    """Per-particle view of one cloud member (anchor first, then window days)."""

    states: tuple
    regimes: tuple
    log_weight: float


@dataclass
class ParticleCloud:
    """Struct-of-arrays particle population.

    window_states[:, j] holds the block state for day window_start + j; the
    anchor sits at day window_start - 1. log_weights are unnormalised.
    """

    anchor_states: np.ndarray       # (N, 4)
    anchor_regimes: np.ndarray      # (N,)
    window_states: np.ndarray       # (N, W, 4)
    window_regimes: np.ndarray      # (N, W)
    window_start: int
    log_weights: np.ndarray         # (N,)

    @property
    def n_particles(self) -> int:
        return self.anchor_states.shape[0]

    @property
    def window_len(self) -> int:
        return self.window_states.shape[1]

    def day_column(self, day: int) -> int:
        col = day - self.window_start
        if not (0 <= col < self.window_len):
            raise InputError(f"day {day} outside window starting {self.window_start}")
        return col

    def slide(self) -> None:
        """Freeze the oldest window day as the new anchor."""
        self.anchor_states = self.window_states[:, 0].copy()
        self.anchor_regimes = self.window_regimes[:, 0].copy()
        self.window_states = self.window_states[:, 1:]
        self.window_regimes = self.window_regimes[:, 1:]
        self.window_start += 1

    def particle(self, j: int) -> Particle:
        states = [SeirsState.from_array(self.anchor_states[j])]
        states += [SeirsState.from_array(self.window_states[j, c])
                   for c in range(self.window_len)]
        regimes = [int(self.anchor_regimes[j])] + [int(r) for r in self.window_regimes[j]]
        return Particle(tuple(states), tuple(regimes), float(self.log_weights[j]))

    def take(self, idx: np.ndarray) -> "ParticleCloud":
        n = self.n_particles
        return ParticleCloud(
            anchor_states=self.anchor_states[idx].copy(),
            anchor_regimes=self.anchor_regimes[idx].copy(),
            window_states=self.window_states[idx].copy(),
            window_regimes=self.window_regimes[idx].copy(),
            window_start=self.window_start,
            log_weights=np.full(n, -math.log(n)),
        )


def init_particles(config: FilterConfig, first_obs: int | None = None) -> ParticleCloud:
    """Day-0 anchors: regimes from the stationary law of the transition
    matrix, E and I from Poisson(first daily observation), R = 0.

    Draw order: regime uniforms, then E, then I. Poisson draws are clamped
    so the state stays feasible (matters only for tiny populations).
    """
    n, n_pop = config.n_particles, config.n_pop
    rng = streams.substream(config.seed, streams.INIT)
    p_one = config.regime_matrix.stationary()[1]
    regimes = (rng.random(n) < p_one).astype(np.int8)
    y1 = 0 if first_obs is None else int(first_obs)
    e = np.minimum(rng.poisson(y1, size=n), n_pop)
    i = np.minimum(rng.poisson(y1, size=n), n_pop - e)
    states = np.zeros((n, 4), dtype=np.int64)
    states[:, 0] = n_pop - e - i
    states[:, 1] = e
    states[:, 2] = i
    return ParticleCloud(
        anchor_states=states,
        anchor_regimes=regimes,
        window_states=np.empty((n, 0, 4), dtype=np.int64),
        window_regimes=np.empty((n, 0), dtype=np.int8),
        window_start=1,
        log_weights=np.full(n, -math.log(n)),
    )


def propose_block(anchor_states: np.ndarray, anchor_regimes: np.ndarray,
                  n_days: int, config: FilterConfig,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample a fresh block of n_days (state, regime) pairs from the anchor.

    Regimes follow the proposal matrix, states the chain-binomial dynamics
    under the sampled regime's transmission rate. Per day the draw order is
    one uniform per particle (regime) then binomial flows S, E, I, R.
    """
    n = anchor_states.shape[0]
    theta, q = config.theta, config.proposal
    betas = np.array([theta.beta0, theta.beta1])
    states = np.empty((n, n_days, 4), dtype=np.int64)
    regimes = np.empty((n, n_days), dtype=np.int8)
    # only the infection probability varies with the state; the three exit
    # probabilities are constants of theta
    probs = np.empty((n, 4))
    probs[:, 1] = -np.expm1(-theta.gamma)
    probs[:, 2] = -np.expm1(-theta.sigma)
    probs[:, 3] = -np.expm1(-theta.xi)
    cur_s, cur_m = anchor_states, anchor_regimes
    for j in range(n_days):
        cur_m = regime_step_vec(cur_m, q, rng)
        probs[:, 0] = -np.expm1(-betas[cur_m] * cur_s[:, 2] / config.n_pop)
        cur_s = apply_flows(cur_s, seirs_flows_vec(cur_s, probs, rng))
        states[:, j] = cur_s
        regimes[:, j] = cur_m
    return states, regimes


def _log_move_ratio(config: FilterConfig) -> np.ndarray | None:
    """log(M/Q) per regime move, or None when the proposal is the dynamics."""
    q = config.proposal
    if q is config.regime_matrix or q == config.regime_matrix:
        return None
    with np.errstate(divide="ignore"):
        ratio = np.where(q.rows > 0,
                         np.log(config.regime_matrix.rows) - np.log(np.where(q.rows > 0, q.rows, 1.0)),
                         0.0)
    return ratio


def _obs_terms(measurements, i_column: np.ndarray, lambda_floor: float) -> np.ndarray:
    """Sum of Poisson log-densities of `measurements` against per-particle
    infectious counts."""
    out = np.zeros(i_column.shape[0])
    if measurements:
        lam = np.maximum(i_column.astype(float), lambda_floor)
        log_lam = np.log(lam)
        for m in measurements:
            out += m.y * log_lam - lam - math.lgamma(m.y + 1)
    return out


@dataclass(frozen=True)
class Block:
    """A proposed or retained trajectory block plus its anchor regimes."""

    states: np.ndarray      # (N, W, 4)
    regimes: np.ndarray     # (N, W)
    anchor_regimes: np.ndarray
    start_day: int

    @property
    def n_days(self) -> int:
        return self.states.shape[1]


def incremental_log_weight(old_block: Block, new_block: Block, t: int,
                           lag: int, config: FilterConfig,
                           buffer: MeasurementBuffer,
                           ledger: dict | None = None) -> np.ndarray:
    """Per-particle log weight factor for replacing old_block by new_block.

    Numerator: for each block day tau, the log-density of every measurement
    usable at wall-clock t with t_g = tau against the new state, plus the
    regime move correction log(M/Q). Denominator: the same over the old
    block's days (tau < t) with the measurement set as of t-1, i.e. the
    usable set minus measurements received exactly at t. -inf is a valid
    output; NaNs from -inf toggles are resolved to -inf.
    """
    win = buffer.window(t, lag)
    ratio = _log_move_ratio(config)
    num = np.zeros(new_block.states.shape[0])
    prev_m = new_block.anchor_regimes
    for j in range(new_block.n_days):
        tau = new_block.start_day + j
        ms = win.get(tau, ())
        num += _obs_terms(ms, new_block.states[:, j, 2], config.lambda_floor)
        if ratio is not None:
            num += ratio[prev_m, new_block.regimes[:, j]]
        prev_m = new_block.regimes[:, j]
        if ledger is not None:
            for m in ms:
                ledger[m.key] = ledger.get(m.key, 0) + 1
    den = np.zeros_like(num)
    prev_m = old_block.anchor_regimes
    for j in range(old_block.n_days):
        tau = old_block.start_day + j
        ms = [m for m in win.get(tau, ()) if m.t_r < t]
        den += _obs_terms(ms, old_block.states[:, j, 2], config.lambda_floor)
        if ratio is not None:
            den += ratio[prev_m, old_block.regimes[:, j]]
        prev_m = old_block.regimes[:, j]
        if ledger is not None:
            for m in ms:
                ledger[m.key] = ledger.get(m.key, 0) - 1
    with np.errstate(invalid="ignore"):
        out = num - den
    out[num == -np.inf] = -np.inf
    return out


def normalize_and_ess(log_weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Max-shifted exponentiation of log weights; returns (weights, ESS)."""
    lse = log_sum_exp(log_weights)
    if not np.isfinite(lse):
        raise DegeneracyError("all particle weights are zero",
                              {"n_particles": len(log_weights)})
    w = np.exp(log_weights - lse)
    w /= w.sum()
    return w, float(1.0 / np.sum(w * w))


def multinomial_resample(cloud: ParticleCloud, weights: np.ndarray,
                         rng: np.random.Generator) -> ParticleCloud:
    """N independent categorical draws; weights reset to uniform."""
    idx = rng.choice(cloud.n_particles, size=cloud.n_particles, p=weights)
    return cloud.take(idx)


def estimates(cloud: ParticleCloud, weights: np.ndarray,
              day: int) -> tuple[np.ndarray, float]:
    """Weighted state mean and outbreak probability for one window day."""
    col = cloud.day_column(day)
    x_hat = weights @ cloud.window_states[:, col].astype(float)
    # clamp away float-summation overshoot (weights sum to 1 +/- eps)
    m_hat = min(max(float(weights @ (cloud.window_regimes[:, col] == 1)), 0.0), 1.0)
    return x_hat, m_hat


@dataclass
class FilterOutput:
    """Per-day filter estimates plus the marginal log-likelihood.

    outbreak_prob is the wall-clock (filtering) estimate of day t computed
    at day t; outbreak_prob_final is the last in-window revision of day t,
    computed at wall-clock min(t + lag, T).
    """

    t: np.ndarray
    x_hat: np.ndarray               # (T, 4) order S, E, I, R
    outbreak_prob: np.ndarray
    outbreak_prob_final: np.ndarray
    ess: np.ndarray
    resampled: np.ndarray
    log_lik_per_day: np.ndarray
    log_likelihood: float
    dropped: int
    weight_trace: np.ndarray | None = None
    measurement_ledger: dict | None = field(default=None, repr=False)

    HEADER = ["t", "i_hat", "s_hat", "e_hat", "r_hat", "outbreak_prob",
              "ess", "resampled", "outbreak_prob_final"]

    def write_csv(self, path, comments: dict | None = None) -> None:
        meta = {"log_likelihood": repr(self.log_likelihood), "dropped": self.dropped}
        meta.update(comments or {})
        with open(path, "w", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}={value}\n")
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            for k in range(len(self.t)):
                writer.writerow([
                    int(self.t[k]),
                    repr(float(self.x_hat[k, 2])), repr(float(self.x_hat[k, 0])),
                    repr(float(self.x_hat[k, 1])), repr(float(self.x_hat[k, 3])),
                    repr(float(self.outbreak_prob[k])), repr(float(self.ess[k])),
                    int(self.resampled[k]), repr(float(self.outbreak_prob_final[k])),
                ])

    @staticmethod
    def read_csv(path) -> "FilterOutput":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value
                    continue
                rows.append(line)
        parsed = list(csv.reader(rows))
        if not parsed or parsed[0] != FilterOutput.HEADER:
            raise InputError(f"{path}: expected filter header {FilterOutput.HEADER}")
        body = parsed[1:]
        if not body:
            raise InputError(f"{path}: empty filter output")
        cols = np.array([[float(v) for v in row] for row in body])
        x_hat = np.empty((len(body), 4))
        x_hat[:, 2], x_hat[:, 0], x_hat[:, 1], x_hat[:, 3] = cols[:, 1], cols[:, 2], cols[:, 3], cols[:, 4]
        return FilterOutput(
            t=cols[:, 0].astype(int), x_hat=x_hat, outbreak_prob=cols[:, 5],
            outbreak_prob_final=cols[:, 8], ess=cols[:, 6],
            resampled=cols[:, 7].astype(bool), log_lik_per_day=np.full(len(body), np.nan),
            log_likelihood=float(meta.get("log_likelihood", "nan")),
            dropped=int(meta.get("dropped", 0)),
        )


def first_observation(buffer: MeasurementBuffer) -> int | None:
    """The earliest same-day reading, used to centre particle initialisation;
    falls back to the earliest measurement of any delay."""
    best = None
    for m in buffer.all_measurements():
        rank = (m.t_r != m.t_g, m.t_g, m.t_r, m.sensor)
        if best is None or rank < best[0]:
            best = (rank, m.y)
    return None if best is None else best[1]


def run_filter(config: FilterConfig, buffer: MeasurementBuffer, horizon: int, *,
               keep_weight_trace: bool = False,
               track_measurements: bool = False) -> FilterOutput:
    """Run the fixed-lag filter over days 1..horizon against a replay buffer.

    Per day: slide the anchor, re-propose the block, apply the incremental
    weight, record estimates and ESS, then resample when ESS drops below
    the configured fraction of the particle count. The accumulated per-day
    increments logsumexp(v_after) - logsumexp(v_before) telescope to the
    log of the mean final unnormalised weight, i.e. the marginal likelihood
    estimate that feeds the parameter sampler.
    """
    n, lag = config.n_particles, config.lag
    cloud = init_particles(config, first_observation(buffer))
    ledger: dict | None = {} if track_measurements else None
    out_x = np.zeros((horizon, 4))
    out_prob = np.zeros(horizon)
    out_final = np.zeros(horizon)
    out_ess = np.zeros(horizon)
    out_res = np.zeros(horizon, dtype=bool)
    out_ll = np.zeros(horizon)
    trace = np.zeros((horizon, n)) if keep_weight_trace else None

    for t in range(1, horizon + 1):
        start_day = max(1, t - lag)
        if start_day - 1 > cloud.window_start - 1:
            cloud.slide()
        old_block = Block(cloud.window_states, cloud.window_regimes,
                          cloud.anchor_regimes, cloud.window_start)
        rng = streams.substream(config.seed, streams.PROPOSE, t)
        new_states, new_regimes = propose_block(cloud.anchor_states, cloud.anchor_regimes,
                                                t - start_day + 1, config, rng)
        new_block = Block(new_states, new_regimes, cloud.anchor_regimes, start_day)
        inc = incremental_log_weight(old_block, new_block, t, lag, config, buffer, ledger)

        lse_before = log_sum_exp(cloud.log_weights)
        with np.errstate(invalid="ignore"):
            logv = cloud.log_weights + inc
        logv[cloud.log_weights == -np.inf] = -np.inf
        lse_after = log_sum_exp(logv)
        if not np.isfinite(lse_after):
            raise DegeneracyError(
                f"all particle weights vanished at day {t}",
                {"day": t, "lag": lag, "dropped": buffer.dropped,
                 "max_increment": float(np.max(inc))})
        out_ll[t - 1] = lse_after - lse_before

        cloud.window_states = new_states
        cloud.window_regimes = new_regimes
        cloud.log_weights = logv
        weights, ess = normalize_and_ess(logv)
        x_hat, m_hat = estimates(cloud, weights, t)
        out_x[t - 1] = x_hat
        out_prob[t - 1] = m_hat
        out_ess[t - 1] = ess
        if trace is not None:
            trace[t - 1] = weights
        exit_day = t - lag
        if exit_day >= 1:
            out_final[exit_day - 1] = estimates(cloud, weights, exit_day)[1]
        if t == horizon:
            for tau in range(max(1, horizon - lag + 1), horizon + 1):
                out_final[tau - 1] = estimates(cloud, weights, tau)[1]
        if ess < config.ess_threshold_fraction * n:
            out_res[t - 1] = True
            cloud = multinomial_resample(cloud, weights,
                                         streams.substream(config.seed, streams.RESAMPLE, t))

    return FilterOutput(
        t=np.arange(1, horizon + 1), x_hat=out_x, outbreak_prob=out_prob,
        outbreak_prob_final=out_final, ess=out_ess, resampled=out_res,
        log_lik_per_day=out_ll, log_likelihood=float(out_ll.sum()),
        dropped=buffer.dropped, weight_trace=trace, measurement_ledger=ledger)


def reference_pf(config: FilterConfig, buffer: MeasurementBuffer, horizon: int, *,
                 keep_weight_trace: bool = False) -> FilterOutput:
    """Standalone Markov-switching bootstrap particle filter (lag 0 only).

    Independent of run_filter's block machinery; used to verify that the
    fixed-lag path with lag 0 reproduces it draw for draw.
    """
    if config.lag != 0:
        raise ConfigError("reference_pf requires lag == 0")
    n = config.n_particles
    theta = config.theta
    betas = np.array([theta.beta0, theta.beta1])
    ratio = _log_move_ratio(config)
    cloud = init_particles(config, first_observation(buffer))
    cur_states, cur_regimes = cloud.anchor_states, cloud.anchor_regimes
    logv = np.full(n, -math.log(n))

    out_x = np.zeros((horizon, 4))
    out_prob = np.zeros(horizon)
    out_ess = np.zeros(horizon)
    out_res = np.zeros(horizon, dtype=bool)
    out_ll = np.zeros(horizon)
    trace = np.zeros((horizon, n)) if keep_weight_trace else None

    for t in range(1, horizon + 1):
        rng = streams.substream(config.seed, streams.PROPOSE, t)
        prev_regimes = cur_regimes
        cur_regimes = regime_step_vec(cur_regimes, config.proposal, rng)
        probs = seirs_step_probs_vec(cur_states, betas[cur_regimes], theta, config.n_pop)
        cur_states = apply_flows(cur_states, seirs_flows_vec(cur_states, probs, rng))

        win = buffer.window(t, 0)
        inc = np.zeros(n)
        inc += _obs_terms(win.get(t, ()), cur_states[:, 2], config.lambda_floor)
        if ratio is not None:
            inc += ratio[prev_regimes, cur_regimes]

        lse_before = log_sum_exp(logv)
        with np.errstate(invalid="ignore"):
            new_logv = logv + inc
        new_logv[logv == -np.inf] = -np.inf
        logv = new_logv
        lse_after = log_sum_exp(logv)
        if not np.isfinite(lse_after):
            raise DegeneracyError(f"all particle weights vanished at day {t}",
                                  {"day": t, "lag": 0})
        out_ll[t - 1] = lse_after - lse_before

        weights, ess = normalize_and_ess(logv)
        out_x[t - 1] = weights @ cur_states.astype(float)
        out_prob[t - 1] = min(max(float(weights @ (cur_regimes == 1)), 0.0), 1.0)
        out_ess[t - 1] = ess
        if trace is not None:
            trace[t - 1] = weights
        if ess < config.ess_threshold_fraction * n:
            out_res[t - 1] = True
            idx = streams.substream(config.seed, streams.RESAMPLE, t).choice(
                n, size=n, p=weights)
            cur_states = cur_states[idx].copy()
            cur_regimes = cur_regimes[idx].copy()
            logv = np.full(n, -math.log(n))

    return FilterOutput(
        t=np.arange(1, horizon + 1), x_hat=out_x, outbreak_prob=out_prob,
        outbreak_prob_final=out_prob.copy(), ess=out_ess, resampled=out_res,
        log_lik_per_day=out_ll, log_likelihood=float(out_ll.sum()),
        dropped=buffer.dropped, weight_trace=trace)


def with_seed(config: FilterConfig, seed: int) -> FilterConfig:
    return replace(config, seed=seed)


def with_theta(config: FilterConfig, theta: Theta) -> FilterConfig:
    return replace(config, theta=theta)
