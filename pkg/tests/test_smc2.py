import math

import numpy as np
import pytest

from epilag.buffer import MeasurementBuffer
from epilag.datagen import SimConfig, simulate_dataset
from epilag.exceptions import ConfigError
from epilag.filters import FilterConfig, run_filter
from epilag.model import Theta
from epilag.smc2 import (IterationRecord, PriorSpec, Smc2Config, ThetaSample,
                         default_prior, estimate_theta, init_samples,
                         log_lq_correction, run_smc2, rw_propose,
                         systematic_resample, weight_update)

from toys import PAPER_MATRIX

TRUTH = Theta(0.1, 0.3, 0.05, 0.08, 0.005)


def tiny_dataset(seed=2, horizon=60):
    cfg = SimConfig(n_pop=10000, horizon=horizon, burn_in=10, theta_true=TRUTH,
                    regime_schedule=[(30, 50)], seed=seed)
    _, _, ms = simulate_dataset(cfg)
    return MeasurementBuffer.from_measurements(ms)


def tiny_config(n=8, k=3, nx=32, seed=0, **prior_kw):
    inner = FilterConfig(n_particles=nx, lag=0, n_pop=10000, theta=TRUTH,
                         regime_matrix=PAPER_MATRIX, seed=0)
    prior = prior_kw.pop("prior", default_prior())
    return Smc2Config(n_samples=n, n_iterations=k, prior=prior,
                      stepsizes=[0.01, 0.02, 0.005, 0.008, 0.0005],
                      filter_config=inner, seed=seed)


class TestPrior:
    def test_sampling_inside_box(self):
        prior = default_prior()
        draws = prior.sample(np.random.default_rng(0), 1000)
        assert np.all(draws >= prior.lows) and np.all(draws <= prior.highs)

    def test_log_density_support(self):
        prior = default_prior()
        assert prior.log_density(np.array([0.1, 0.3, 0.05, 0.08, 0.005])) == 0.0
        assert prior.log_density(np.array([0.6, 0.3, 0.05, 0.08, 0.005])) == -np.inf

    def test_bad_bounds(self):
        with pytest.raises(ConfigError):
            PriorSpec(np.ones(5), np.zeros(5))


class TestRwPropose:
    def test_vanishing_step_is_identity(self):
        theta = TRUTH
        out = rw_propose(theta, [1e-15] * 5, np.random.default_rng(0))
        assert np.allclose(out.as_array(), theta.as_array(), rtol=0, atol=1e-12)

    def test_moment_match(self):
        # far from zero the reflection never triggers: sd matches stepsizes
        rng = np.random.default_rng(1)
        steps = np.array([0.05, 0.02, 0.03, 0.01, 0.04])
        base = Theta(1.0, 1.2, 0.9, 1.1, 1.3)
        draws = np.stack([rw_propose(base, steps, rng).as_array()
                          for _ in range(100_000)])
        sd = draws.std(axis=0, ddof=1)
        assert np.all(np.abs(sd - steps) / steps < 0.02)

    def test_reflection_keeps_positive(self):
        rng = np.random.default_rng(2)
        base = Theta(1e-4, 1e-4, 1e-4, 1e-4, 1e-4)
        for _ in range(2000):
            arr = rw_propose(base, [0.05] * 5, rng).as_array()
            assert np.all(arr > 0)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ConfigError):
            rw_propose(TRUTH, [0.0] * 5, np.random.default_rng(0))


class TestLKernelCancellation:
    def test_symmetric_correction_is_zero(self):
        rng = np.random.default_rng(3)
        steps = np.array([0.01, 0.02, 0.005, 0.008, 0.0005])
        for _ in range(200):
            a = rng.uniform(0.001, 0.5, size=5)
            b = np.abs(a + rng.normal(size=5) * steps)
            assert log_lq_correction(a, b, steps) == pytest.approx(0.0, abs=1e-12)


class TestWeightUpdate:
    def _sample(self, theta_arr, log_w, ll):
        return ThetaSample(Theta.from_array(theta_arr), log_w, ll)

    def test_same_position_same_estimate_unchanged(self):
        prior = default_prior()
        arr = TRUTH.as_array()
        prev = self._sample(arr, -1.3, -500.0)
        new = self._sample(arr, 0.0, -500.0)
        assert weight_update(prev, new, prior) == pytest.approx(-1.3)

    def test_outside_prior_is_dead(self):
        prior = default_prior()
        prev = self._sample(TRUTH.as_array(), 0.0, -500.0)
        outside = TRUTH.as_array()
        outside[1] = 2.0
        assert weight_update(prev, self._sample(outside, 0.0, -480.0), prior) == -np.inf

    def test_higher_likelihood_raises_weight(self):
        prior = default_prior()
        prev = self._sample(TRUTH.as_array(), -2.0, -500.0)
        better = self._sample(TRUTH.as_array() * 1.01, 0.0, -490.0)
        worse = self._sample(TRUTH.as_array() * 0.99, 0.0, -510.0)
        assert weight_update(prev, better, prior) == pytest.approx(-2.0 + 10.0)
        assert weight_update(prev, worse, prior) == pytest.approx(-2.0 - 10.0)

    def test_dead_stays_dead(self):
        prior = default_prior()
        dead = self._sample(TRUTH.as_array(), -np.inf, -np.inf)
        alive = self._sample(TRUTH.as_array(), 0.0, -400.0)
        assert weight_update(dead, alive, prior) == -np.inf


class TestSystematicResample:
    def test_uniform_weights_one_offspring_each(self):
        n = 64
        idx = systematic_resample(np.full(n, 1 / n), np.random.default_rng(0))
        assert np.array_equal(np.sort(idx), np.arange(n))

    def test_point_mass_copies(self):
        w = np.zeros(16)
        w[11] = 1.0
        idx = systematic_resample(w, np.random.default_rng(1))
        assert (idx == 11).all()

    def test_offspring_floor_ceil_property(self):
        rng = np.random.default_rng(2)
        for _ in range(10_000):
            n = int(rng.integers(2, 40))
            w = rng.dirichlet(np.ones(n) * rng.uniform(0.2, 5.0))
            idx = systematic_resample(w, rng)
            counts = np.bincount(idx, minlength=n)
            assert np.all(counts >= np.floor(n * w))
            assert np.all(counts <= np.ceil(n * w))


class TestEstimateTheta:
    def _rec(self, k, ess, theta):
        return IterationRecord(k, ess, False, np.asarray(theta, dtype=float))

    def test_single_iteration_identity(self):
        rec = self._rec(1, 12.0, [0.1, 0.3, 0.05, 0.08, 0.005])
        assert np.allclose(estimate_theta([rec]), rec.theta_hat)

    def test_identical_iterations(self):
        rec = self._rec(1, 5.0, [0.1, 0.3, 0.05, 0.08, 0.005])
        recs = [rec, self._rec(2, 9.0, rec.theta_hat), self._rec(3, 2.0, rec.theta_hat)]
        assert np.allclose(estimate_theta(recs), rec.theta_hat)

    def test_convex_combination(self):
        a = self._rec(1, 4.0, np.zeros(5))
        b = self._rec(2, 12.0, np.ones(5))
        est = estimate_theta([a, b])
        assert np.all(est >= 0) and np.all(est <= 1)
        assert est[0] == pytest.approx(12 / 16)


class TestInitSamples:
    def test_point_mass_prior_weights_differ_only_by_filter_noise(self):
        arr = TRUTH.as_array()
        prior = PriorSpec(arr.copy(), arr.copy())
        config = tiny_config(n=8, prior=prior)
        buffer = tiny_dataset()
        samples = init_samples(config, buffer, 60)
        assert all(s.theta == TRUTH for s in samples)
        logw = np.array([s.log_weight for s in samples])
        # direct replicate estimate of the filter noise at theta_true
        direct = np.array([
            run_filter(FilterConfig(n_particles=32, lag=0, n_pop=10000, theta=TRUTH,
                                    regime_matrix=PAPER_MATRIX, seed=900 + r),
                       tiny_dataset(), 60).log_likelihood
            for r in range(8)])
        assert np.isfinite(logw).all()
        assert logw.std(ddof=1) < 4 * direct.std(ddof=1) + 1.0

    def test_prior_sampling_reproducible(self):
        config = tiny_config()
        buffer = tiny_dataset()
        a = init_samples(config, buffer, 60)
        b = init_samples(config, buffer, 60)
        assert all(x.theta == y.theta and x.log_weight == y.log_weight
                   for x, y in zip(a, b))


class TestRunSmc2:
    def test_smoke_and_shape(self):
        result = run_smc2(tiny_config(), tiny_dataset(), 60)
        assert len(result.iterations) == 3
        assert result.final_thetas.shape == (8, 5)
        assert result.final_weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(result.recycled_theta > 0)
        assert len(result.diagnostics["ess_trace"]) == 3

    def test_ess_bounds_and_resample_flags(self):
        result = run_smc2(tiny_config(n=16, k=4), tiny_dataset(), 60)
        for rec in result.iterations:
            assert 1.0 <= rec.ess <= 16.0 + 1e-9
            assert rec.resampled == (rec.ess < 8.0)

    def test_deterministic_per_seed(self):
        a = run_smc2(tiny_config(seed=5), tiny_dataset(), 60)
        b = run_smc2(tiny_config(seed=5), tiny_dataset(), 60)
        assert np.array_equal(a.final_thetas, b.final_thetas)
        assert np.allclose(a.recycled_theta, b.recycled_theta)
        c = run_smc2(tiny_config(seed=6), tiny_dataset(), 60)
        assert not np.array_equal(a.final_thetas, c.final_thetas)

    def test_csv_outputs(self, tmp_path):
        result = run_smc2(tiny_config(), tiny_dataset(), 60)
        ipath = tmp_path / "iters.csv"
        ppath = tmp_path / "post.csv"
        result.write_iterations_csv(ipath, {"config": "c0ffee"})
        result.write_posterior_csv(ppath, {"config": "c0ffee"})
        itext = ipath.read_text()
        assert itext.startswith("# config=c0ffee")
        assert "k,ess_theta,resampled,beta0_hat" in itext
        assert "beta0,beta1,gamma,sigma,xi,weight,log_likelihood" in ppath.read_text()
