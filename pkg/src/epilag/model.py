"""Regime-switched stochastic SEIRS dynamics and the Poisson observation model.

The population is split into Susceptible / Exposed / Infectious / Recovered
compartments. Daily outflows are binomial draws with exit probabilities
1 - exp(-rate); the transmission rate switches between a baseline and an
outbreak value according to a binary regime driven by a 2x2 Markov chain.
Observations are Poisson counts of the infectious compartment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import InputError, ParameterError

# Default rate floor for the Poisson observation density: a particle with
# zero infections keeps a finite (if vanishing) log-density against a
# positive count instead of -inf.
LAMBDA_FLOOR = 1e-3


@dataclass(frozen=True)
class SeirsState:
    """Compartment occupancies on one day. Conserves s + e + i + r."""

    s: int
    e: int
    i: int
    r: int

    def __post_init__(self):
        if min(self.s, self.e, self.i, self.r) < 0:
            raise ParameterError(f"negative compartment in {self}")

    @property
    def n_pop(self) -> int:
        return self.s + self.e + self.i + self.r

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.i, self.r], dtype=np.int64)

    @staticmethod
    def from_array(a) -> "SeirsState":
        return SeirsState(int(a[0]), int(a[1]), int(a[2]), int(a[3]))


@dataclass(frozen=True)
class Theta:
    """Static rate parameters, all per day and strictly positive.

    beta0 / beta1 are the non-outbreak / outbreak transmission rates; gamma
    is the incubation exit rate, sigma the recovery rate, xi the
    immunity-loss rate.
    """

    beta0: float
    beta1: float
    gamma: float
    sigma: float
    xi: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"theta.{name}={value!r} must be finite and > 0")

    def beta(self, regime: int) -> float:
        return self.beta1 if regime else self.beta0

    def as_dict(self) -> dict:
        return {"beta0": self.beta0, "beta1": self.beta1,
                "gamma": self.gamma, "sigma": self.sigma, "xi": self.xi}

    def as_array(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.gamma, self.sigma, self.xi])

    @staticmethod
    def from_array(a) -> "Theta":
        return Theta(*(float(v) for v in a))


PARAM_NAMES = ("beta0", "beta1", "gamma", "sigma", "xi")


class RegimeMatrix:
    """2x2 regime transition matrix; entry [a, b] = P(next = b | current = a)."""

    def __init__(self, rows):
        m = np.asarray(rows, dtype=float)
        if m.shape != (2, 2):
            raise ParameterError(f"regime matrix must be 2x2, got shape {m.shape}")
        if np.any(m < 0) or np.any(m > 1):
            raise ParameterError("regime matrix entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-12):
            raise ParameterError("regime matrix rows must sum to 1 within 1e-12")
        self.rows = m

    def __getitem__(self, idx):
        return self.rows[idx]

    def __eq__(self, other):
        return isinstance(other, RegimeMatrix) and np.array_equal(self.rows, other.rows)

    def __repr__(self):
        return f"RegimeMatrix({self.rows.tolist()})"

    def stationary(self) -> np.ndarray:
        """Stationary law of the two-state chain: (p10, p01) / (p01 + p10).

        Falls back to uniform when both off-diagonals are zero (identity
        matrix has no unique stationary law).
        """
        p01, p10 = self.rows[0, 1], self.rows[1, 0]
        if p01 + p10 == 0.0:
            return np.array([0.5, 0.5])
        return np.array([p10, p01]) / (p01 + p10)


def transition_probs(state: SeirsState, theta: Theta, regime: int, n_pop: int) -> np.ndarray:
    """Daily exit probabilities [p(S->E), p(E->I), p(I->R), p(R->S)].

    p(S->E) = 1 - exp(-beta_regime * I / N); the exponential form is kept in
    both regimes so the output is a probability for any positive rate.
    """
    if n_pop <= 0:
        raise ParameterError(f"n_pop={n_pop} must be positive")
    return np.array([
        -np.expm1(-theta.beta(regime) * state.i / n_pop),
        -np.expm1(-theta.gamma),
        -np.expm1(-theta.sigma),
        -np.expm1(-theta.xi),
    ])


def seirs_flows_vec(states: np.ndarray, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Binomial compartment outflows for a batch of states.

    states: (n, 4) int array, probs: (n, 4) exit probabilities. Draw order is
    fixed as S, E, I, R so runs are reproducible per stream.
    Returns (n, 4) flows [n(S->E), n(E->I), n(I->R), n(R->S)].
    """
    flows = np.empty_like(states)
    for c in range(4):
        flows[:, c] = rng.binomial(states[:, c], probs[:, c])
    return flows


def apply_flows(states: np.ndarray, flows: np.ndarray) -> np.ndarray:
    """Balance equations: each flow leaves one compartment and enters the next."""
    n_se, n_ei, n_ir, n_rs = flows[:, 0], flows[:, 1], flows[:, 2], flows[:, 3]
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] - n_se + n_rs
    out[:, 1] = states[:, 1] + n_se - n_ei
    out[:, 2] = states[:, 2] + n_ei - n_ir
    out[:, 3] = states[:, 3] + n_ir - n_rs
    return out


def seirs_step_probs_vec(states: np.ndarray, beta: np.ndarray, theta: Theta,
                         n_pop: int) -> np.ndarray:
    """Exit probabilities for a batch of states under per-row transmission rates."""
    probs = np.empty((states.shape[0], 4))
    probs[:, 0] = -np.expm1(-beta * states[:, 2] / n_pop)
    probs[:, 1] = -np.expm1(-theta.gamma)
    probs[:, 2] = -np.expm1(-theta.sigma)
    probs[:, 3] = -np.expm1(-theta.xi)
    return probs


def seirs_step(state: SeirsState, probs, rng: np.random.Generator) -> SeirsState:
    """One day of the chain-binomial SEIRS update for a single state."""
    arr = state.as_array()[None, :]
    flows = seirs_flows_vec(arr, np.asarray(probs, dtype=float)[None, :], rng)
    return SeirsState.from_array(apply_flows(arr, flows)[0])


def regime_step(regime: int, matrix: RegimeMatrix, rng: np.random.Generator) -> int:
    """Sample the next regime from the row of the current one."""
    return int(rng.random() < matrix.rows[regime, 1])


def regime_step_vec(regimes: np.ndarray, matrix: RegimeMatrix,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorised regime transition; one uniform per particle."""
    p_to_one = matrix.rows[regimes, 1]
    return (rng.random(regimes.shape[0]) < p_to_one).astype(np.int8)


def poisson_log_pmf(y, rate):
    """log Poisson(y; rate); broadcasts over array rates."""
    rate = np.asarray(rate, dtype=float)
    return y * np.log(rate) - rate - gammaln(y + 1)


def obs_log_density(y: int, state: SeirsState, lambda_floor: float = LAMBDA_FLOOR) -> float:
    """log P(observed count y | state), Poisson with rate max(I, lambda_floor)."""
    if y < 0:
        raise InputError(f"observed count y={y} must be non-negative")
    return float(poisson_log_pmf(y, max(state.i, lambda_floor)))
