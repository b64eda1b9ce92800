import math

import numpy as np
import pytest
from scipy.stats import chi2

from epilag.exceptions import InputError, ParameterError
from epilag.model import (RegimeMatrix, SeirsState, Theta, obs_log_density,
                          regime_step, seirs_flows_vec, seirs_step,
                          transition_probs)


@pytest.fixture
def theta():
    return Theta(0.2, 0.4, 0.2, 0.1, 1.0 / 180.0)


class TestTheta:
    def test_regime_selects_beta(self, theta):
        assert theta.beta(0) == 0.2
        assert theta.beta(1) == 0.4

    @pytest.mark.parametrize("bad", [0.0, -0.1, float("inf"), float("nan")])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ParameterError):
            Theta(bad, 0.4, 0.2, 0.1, 0.005)

    def test_array_roundtrip(self, theta):
        assert Theta.from_array(theta.as_array()) == theta


class TestRegimeMatrix:
    def test_row_sum_enforced(self):
        with pytest.raises(ParameterError):
            RegimeMatrix([[0.9, 0.2], [0.5, 0.5]])

    def test_entry_bounds(self):
        with pytest.raises(ParameterError):
            RegimeMatrix([[1.2, -0.2], [0.5, 0.5]])

    def test_stationary_two_state(self):
        m = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
        pi = m.stationary()
        assert pi[1] == pytest.approx(0.001 / 0.012)
        assert pi.sum() == pytest.approx(1.0)

    def test_stationary_identity_falls_back_uniform(self):
        assert np.allclose(RegimeMatrix(np.eye(2)).stationary(), [0.5, 0.5])


class TestTransitionProbs:
    def test_zero_beta_means_no_exposure(self, theta):
        state = SeirsState(9000, 0, 1000, 0)
        tiny = Theta(1e-300, 1e-300, 0.2, 0.1, 0.005)
        assert transition_probs(state, tiny, 0, 10000)[0] == pytest.approx(0.0)

    def test_closed_form_values(self, theta):
        state = SeirsState(9900, 0, 100, 0)
        probs = transition_probs(state, theta, 0, 10000)
        assert probs[0] == pytest.approx(1 - math.exp(-0.002), rel=1e-12)
        assert probs[0] == pytest.approx(0.0019980019986673331)
        assert probs[1] == pytest.approx(0.18126924692201818)

    def test_regime_switches_transmission(self, theta):
        state = SeirsState(9900, 0, 100, 0)
        p0 = transition_probs(state, theta, 0, 10000)[0]
        p1 = transition_probs(state, theta, 1, 10000)[0]
        assert p1 == pytest.approx(1 - math.exp(-0.004), rel=1e-12)
        assert p1 > p0

    def test_bounds_random(self, theta):
        rng = np.random.default_rng(0)
        for _ in range(200):
            t = Theta(*rng.uniform(1e-6, 5.0, size=5))
            state = SeirsState(5000, 2000, 2000, 1000)
            probs = transition_probs(state, t, int(rng.integers(2)), 10000)
            assert np.all(probs >= 0) and np.all(probs <= 1)

    def test_monotone_in_rates_and_infectious(self, theta):
        rng = np.random.default_rng(1)
        for _ in range(100):
            base = rng.uniform(0.01, 1.0, size=5)
            lo = Theta(*base)
            hi = Theta(*(base * rng.uniform(1.0, 3.0, size=5)))
            s_lo = SeirsState(8000, 500, 500, 1000)
            s_hi = SeirsState(7800, 500, 700, 1000)
            p_lo = transition_probs(s_lo, lo, 1, 10000)
            p_hi = transition_probs(s_lo, hi, 1, 10000)
            assert np.all(p_hi >= p_lo)
            assert transition_probs(s_hi, lo, 1, 10000)[0] >= p_lo[0]

    def test_bad_population(self, theta):
        with pytest.raises(ParameterError):
            transition_probs(SeirsState(1, 0, 0, 0), theta, 0, 0)


class TestSeirsStep:
    def test_zero_probs_keep_state(self):
        state = SeirsState(5000, 100, 50, 10)
        rng = np.random.default_rng(0)
        assert seirs_step(state, [0, 0, 0, 0], rng) == state

    def test_unit_probs_rotate(self):
        state = SeirsState(5000, 100, 50, 10)
        rng = np.random.default_rng(0)
        out = seirs_step(state, [1, 1, 1, 1], rng)
        assert (out.s, out.e, out.i, out.r) == (10, 5000, 100, 50)

    def test_population_conserved_along_trajectory(self, theta):
        rng = np.random.default_rng(7)
        state = SeirsState(9900, 0, 100, 0)
        for _ in range(300):
            probs = transition_probs(state, theta, 0, 10000)
            state = seirs_step(state, probs, rng)
            assert state.n_pop == 10000

    def test_binomial_moments(self):
        # n(S->E) at S=5000, p=0.002: mean 10, sd of the mean over 1e5 draws
        rng = np.random.default_rng(11)
        states = np.tile([5000, 0, 0, 0], (100_000, 1)).astype(np.int64)
        probs = np.tile([0.002, 0.0, 0.0, 0.0], (100_000, 1))
        flows = seirs_flows_vec(states, probs, rng)
        se = math.sqrt(5000 * 0.002 * 0.998 / 100_000)
        assert abs(flows[:, 0].mean() - 10.0) < 3 * se

    def test_quasi_steady_equilibrium(self, theta):
        # 430 days at N=10000 settles near the endemic level (roughly 256
        # infectious for these rates) without extinction
        rng = np.random.default_rng(3)
        state = SeirsState(9900, 0, 100, 0)
        tail = []
        for day in range(430):
            probs = transition_probs(state, theta, 0, 10000)
            state = seirs_step(state, probs, rng)
            if day >= 330:
                tail.append(state.i)
        assert 120 < np.mean(tail) < 450


class TestRegimeStep:
    def test_identity_never_switches(self):
        rng = np.random.default_rng(0)
        m = RegimeMatrix(np.eye(2))
        assert all(regime_step(0, m, rng) == 0 for _ in range(50))
        assert all(regime_step(1, m, rng) == 1 for _ in range(50))

    def test_forced_switch(self):
        rng = np.random.default_rng(0)
        m = RegimeMatrix([[0.0, 1.0], [1.0, 0.0]])
        assert regime_step(0, m, rng) == 1

    def test_long_run_occupancy(self):
        m = RegimeMatrix([[0.999, 0.001], [0.011, 0.989]])
        rng = np.random.default_rng(5)
        uniforms = rng.random(1_000_000)
        state, ones = 0, 0
        for u in uniforms:
            state = int(u < m.rows[state, 1])
            ones += state
        assert abs(ones / 1_000_000 - 0.001 / 0.012) < 0.005

    def test_transition_frequencies_chi2(self):
        # empirical transition counts vs matrix rows at alpha = 0.01
        m = RegimeMatrix([[0.95, 0.05], [0.2, 0.8]])
        rng = np.random.default_rng(9)
        uniforms = rng.random(1_000_000)
        counts = np.zeros((2, 2))
        state = 0
        for u in uniforms:
            nxt = int(u < m.rows[state, 1])
            counts[state, nxt] += 1
            state = nxt
        stat = 0.0
        for a in range(2):
            expected = counts[a].sum() * m.rows[a]
            stat += ((counts[a] - expected) ** 2 / expected).sum()
        assert stat < chi2.ppf(0.99, df=2)


class TestObsLogDensity:
    def test_closed_form(self):
        # log Poisson(3; 3) = log(27 e^-3 / 6)
        assert obs_log_density(3, SeirsState(0, 0, 3, 0)) == pytest.approx(
            math.log(4.5) - 3.0)
        assert obs_log_density(3, SeirsState(0, 0, 3, 0)) == pytest.approx(
            -1.4959226032237258)

    def test_floor_keeps_zero_zero_finite(self):
        val = obs_log_density(0, SeirsState(10, 0, 0, 0), lambda_floor=1e-3)
        assert val == pytest.approx(-1e-3)

    def test_mismatch_strongly_penalised(self):
        state = SeirsState(0, 0, 5, 0)
        assert obs_log_density(50, state) < obs_log_density(5, state) - 20

    def test_negative_count_rejected(self):
        with pytest.raises(InputError):
            obs_log_density(-1, SeirsState(0, 0, 3, 0))

    def test_finite_against_zero_infectious(self):
        assert np.isfinite(obs_log_density(40, SeirsState(10, 0, 0, 0)))
