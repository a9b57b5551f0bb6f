"""Tests for the noisy max recursion, growth estimates and the robust algorithm."""

import logging
import math

import numpy as np
import pytest

from maxcons.bounds import compute_bounds_report, lower_bound_irregular, upper_bound_ldp
from maxcons.consensus import (
    config_fingerprint,
    end_to_end_variance,
    end_to_end_variance_bound,
    estimate_growth_rate,
    growth_rate_trials,
    map_trials,
    metropolis_weights,
    robust_consensus_trials,
    robust_max_consensus,
    run_noisy_max,
    run_sma_baseline,
    run_two_phase,
    settling_iteration,
    soft_max,
    trajectory_statistics,
    trial_streams,
)
from maxcons.errors import DomainError
from maxcons.graph import benchmark_graph, diameter, erdos_renyi_graph, load_bundled_graph
from maxcons.noise import GaussianNoise, LaplaceNoise, UniformNoise

PETERSEN = load_bundled_graph("petersen")
NOISELESS = GaussianNoise(0.0)


class TestNoisyMax:
    """Test single runs of the recursion."""

    def test_deterministic_under_seed(self):
        x0 = np.arange(10.0)
        a = run_noisy_max(PETERSEN, x0, LaplaceNoise(), 0.3, 20, np.random.default_rng(1))
        b = run_noisy_max(PETERSEN, x0, LaplaceNoise(), 0.3, 20, np.random.default_rng(1))
        assert np.array_equal(a.states, b.states)
        assert a.config_fingerprint == b.config_fingerprint

    def test_fingerprint_tracks_configuration(self):
        rng = np.random.default_rng(0)
        assert config_fingerprint(PETERSEN, GaussianNoise(), 0.0, rng) != config_fingerprint(
            PETERSEN, GaussianNoise(), 0.5, rng
        )

    def test_shape(self):
        run = run_noisy_max(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 7, np.random.default_rng(0))
        assert run.states.shape == (8, 10)
        assert run.t_count == 7
        assert np.array_equal(run.states[0], np.zeros(10))

    def test_noiseless_reaches_max_within_diameter(self):
        x0 = np.linspace(1.0, 10.0, 10)
        run = run_noisy_max(PETERSEN, x0, NOISELESS, 0.0, diameter(PETERSEN), np.random.default_rng(0))
        assert (run.final == 10.0).all()

    def test_noiseless_with_erasures_never_overshoots(self):
        x0 = np.linspace(1.0, 10.0, 10)
        run = run_noisy_max(PETERSEN, x0, NOISELESS, 0.7, 30, np.random.default_rng(2))
        assert run.states.max() == 10.0
        assert (np.diff(run.states, axis=0) >= 0).all()

    def test_states_never_decrease(self):
        run = run_noisy_max(PETERSEN, np.zeros(10), UniformNoise(), 0.2, 50, np.random.default_rng(3))
        assert (np.diff(run.states, axis=0) >= 0).all()

    def test_compensation_is_subtracted(self):
        run = run_noisy_max(PETERSEN, np.zeros(10), NOISELESS, 0.0, 5, np.random.default_rng(0), compensation=1.0)
        assert np.allclose(run.final, -5.0)

    def test_large_erasure_penalty_matches_hard_erasure(self):
        x0 = np.linspace(0.0, 1.0, 10)
        hard = run_noisy_max(PETERSEN, x0, GaussianNoise(), 0.5, 30, np.random.default_rng(4))
        soft = run_noisy_max(PETERSEN, x0, GaussianNoise(), 0.5, 30, np.random.default_rng(4), erasure_penalty=1e6)
        assert np.array_equal(hard.states, soft.states)

    def test_self_loop_noise_runs(self):
        run = run_noisy_max(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 10, np.random.default_rng(5), self_loop_noise=True)
        assert np.isfinite(run.states).all()

    def test_self_loop_noise_never_lowers_expected_state(self):
        def final_mean(self_loop_noise):
            return lambda rng: run_noisy_max(
                PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 20, rng, self_loop_noise=self_loop_noise
            ).final.mean()

        on = np.array(map_trials(final_mean(True), 300, seed=13))
        off = np.array(map_trials(final_mean(False), 300, seed=13))
        diff = on - off
        assert diff.mean() >= -3 * diff.std(ddof=1) / math.sqrt(diff.size)

    def test_wrong_initial_shape(self):
        with pytest.raises(DomainError):
            run_noisy_max(PETERSEN, np.zeros(3), GaussianNoise(), 0.0, 5, np.random.default_rng(0))

    def test_non_finite_initial_state(self):
        x0 = np.zeros(10)
        x0[2] = np.nan
        with pytest.raises(DomainError):
            run_noisy_max(PETERSEN, x0, GaussianNoise(), 0.0, 5, np.random.default_rng(0))

    def test_zero_steps(self):
        with pytest.raises(DomainError):
            run_noisy_max(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 0, np.random.default_rng(0))

    def test_statistics_columns(self):
        run = run_noisy_max(PETERSEN, np.arange(10.0), GaussianNoise(), 0.0, 4, np.random.default_rng(0))
        stats = trajectory_statistics(run)
        assert stats.shape == (5, 5)
        assert np.array_equal(stats[:, 0], np.arange(5.0))
        assert stats[0, 1] == pytest.approx(4.5)
        assert (stats[:, 2] <= stats[:, 1]).all() and (stats[:, 1] <= stats[:, 3]).all()


class TestTrials:
    """Test seeded trial fan-out."""

    def test_streams_are_reproducible(self):
        a = [rng.random() for rng in trial_streams(7, 3)]
        b = [rng.random() for rng in trial_streams(7, 3)]
        assert a == b
        assert len(set(a)) == 3

    def test_thread_count_does_not_change_results(self):
        serial = map_trials(lambda rng: rng.normal(size=4).sum(), 16, seed=11, threads=1)
        threaded = map_trials(lambda rng: rng.normal(size=4).sum(), 16, seed=11, threads=4)
        assert serial == threaded

    def test_needs_a_trial(self):
        with pytest.raises(DomainError):
            trial_streams(0, 0)


class TestGrowthRate:
    """Test Monte Carlo growth-rate estimation."""

    def test_noiseless_rate_is_zero(self):
        estimate = estimate_growth_rate(PETERSEN, NOISELESS, 0.0, 50, np.random.default_rng(0))
        assert estimate.lambda_hat_per_node == [0.0] * 10
        assert estimate.stderr == 0.0

    def test_per_node_estimates(self):
        estimate = estimate_growth_rate(PETERSEN, GaussianNoise(), 0.0, 100, np.random.default_rng(1))
        assert len(estimate.lambda_hat_per_node) == 10
        assert estimate.mean == pytest.approx(np.mean(estimate.lambda_hat_per_node))

    @pytest.mark.parametrize("g", [PETERSEN, erdos_renyi_graph(16, 0.35, seed=2)], ids=["petersen", "er16"])
    def test_nodes_agree_on_rate(self, g):
        estimate = estimate_growth_rate(g, GaussianNoise(), 0.0, 400, np.random.default_rng(14))
        spread = max(estimate.lambda_hat_per_node) - min(estimate.lambda_hat_per_node)
        assert spread < 0.05 * estimate.mean

    def test_rate_does_not_depend_on_initial_state(self):
        t_max, trials = 400, 40
        x0 = np.linspace(100.0, 200.0, 10)
        from_zero = np.array(
            map_trials(lambda rng: estimate_growth_rate(PETERSEN, GaussianNoise(), 0.0, t_max, rng).mean, trials, 15)
        )
        from_x0 = np.array(
            map_trials(
                lambda rng: (run_noisy_max(PETERSEN, x0, GaussianNoise(), 0.0, t_max, rng).final.mean() - 200.0) / t_max,
                trials,
                16,
            )
        )
        se = math.hypot(from_zero.std(ddof=1), from_x0.std(ddof=1)) / math.sqrt(trials)
        assert abs(from_zero.mean() - from_x0.mean()) <= 3 * se

    def test_estimate_lies_between_bounds(self):
        model = GaussianNoise()
        summary = growth_rate_trials(PETERSEN, model, 0.0, 300, 20, seed=2)
        report = compute_bounds_report(model, PETERSEN)
        assert report.lower - 0.1 < summary.mean < report.upper_ldp

    def test_erasures_slow_growth(self):
        fixed = growth_rate_trials(PETERSEN, GaussianNoise(), 0.0, 200, 10, seed=3)
        erased = growth_rate_trials(PETERSEN, GaussianNoise(), 0.5, 200, 10, seed=3)
        assert erased.mean < fixed.mean

    def test_family_ordering(self):
        summaries = {
            name: growth_rate_trials(PETERSEN, model, 0.0, 200, 100, seed=4)
            for name, model in [("laplace", LaplaceNoise()), ("gaussian", GaussianNoise()), ("uniform", UniformNoise())]
        }

        def ordered(heavier, lighter):
            a, b = summaries[heavier], summaries[lighter]
            return a.mean + 3 * math.hypot(a.stderr, b.stderr) > b.mean

        assert ordered("laplace", "gaussian")
        assert ordered("gaussian", "uniform")

    def test_variance_bound(self):
        g = erdos_renyi_graph(12, 0.4, seed=3)
        t_max, trials = 25, 500
        summary = growth_rate_trials(g, GaussianNoise(), 0.0, t_max, trials, seed=5)
        var = summary.per_node_variance[0]
        se = var * math.sqrt(2.0 / (trials - 1))
        assert var <= 1.0 / t_max + 3 * se

    @pytest.mark.slow
    @pytest.mark.parametrize("model", [GaussianNoise(), LaplaceNoise(), UniformNoise()], ids=lambda m: m.family.value)
    @pytest.mark.parametrize("t_max", [25, 100, 400])
    def test_variance_bound_full_scale(self, model, t_max):
        g = erdos_renyi_graph(12, 0.4, seed=3)
        trials = 2000
        summary = growth_rate_trials(g, model, 0.0, t_max, trials, seed=6, threads=4)
        var = summary.per_node_variance[0]
        se = var * math.sqrt(2.0 / (trials - 1))
        assert var <= model.variance / t_max + 3 * se

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("p", [0.0, 0.5])
    def test_bracketed_by_bounds(self, seed, p):
        rng = np.random.default_rng(300 + seed)
        g = erdos_renyi_graph(int(rng.integers(8, 21)), 0.35, seed=seed)
        model = GaussianNoise()
        summary = growth_rate_trials(g, model, p, 400, 200, seed=seed, threads=4)
        report = compute_bounds_report(model, g, p)
        assert report.lower - 3 * summary.stderr <= summary.mean <= report.upper_ldp + 3 * summary.stderr

    def test_lower_bound_with_erasures_below_estimate(self):
        model, p = GaussianNoise(), 0.5
        summary = growth_rate_trials(PETERSEN, model, p, 300, 20, seed=7)
        assert summary.mean > lower_bound_irregular(model, PETERSEN, p) - 0.1
        assert summary.mean < upper_bound_ldp(model, 3.0, p).value


class TestRobustConsensus:
    """Test the two-run compensated algorithm."""

    def test_noiseless_recovers_max_exactly(self):
        x0 = np.linspace(3.0, 7.0, 10)
        result = robust_max_consensus(PETERSEN, x0, NOISELESS, 0.0, 20, None, np.random.default_rng(0))
        assert result.final_estimates == [7.0] * 10
        assert result.bias == 0.0
        assert result.iteration_count == 2 * diameter(PETERSEN)

    def test_lambda_hat_is_first_run_rate(self):
        run = run_two_phase(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 50, 4, np.random.default_rng(1))
        assert np.allclose(run.lambda_hat, run.estimation.final / 50)
        assert run.compensated.t_count == 4

    def test_second_run_shorter_than_diameter(self):
        with pytest.raises(DomainError):
            run_two_phase(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 50, 1, np.random.default_rng(0))

    def test_compensation_removes_drift(self):
        x0 = np.linspace(100.0, 200.0, 10)
        model = GaussianNoise()
        robust = robust_consensus_trials(PETERSEN, x0, model, 0.0, 400, 10, 20, seed=8)
        conventional = np.mean(
            [run_noisy_max(PETERSEN, x0, model, 0.0, 10, rng).final.mean() for rng in trial_streams(8, 20)]
        )
        assert abs(robust.bias) < conventional - 200.0

    def test_compensated_run_has_no_trend(self):
        x0 = np.linspace(100.0, 200.0, 10)
        t2 = 2 * diameter(PETERSEN)

        def late_slope(rng):
            states = run_two_phase(PETERSEN, x0, GaussianNoise(), 0.0, 400, None, rng).compensated.states
            steps = np.arange(t2 // 2, t2 + 1)
            return np.polyfit(steps, states[steps].mean(axis=1), 1)[0]

        slopes = np.array(map_trials(late_slope, 100, seed=17))
        assert abs(slopes.mean()) <= 3 * slopes.std(ddof=1) / math.sqrt(slopes.size)

    def test_trials_report_dispersion(self):
        result = robust_consensus_trials(PETERSEN, np.zeros(10), GaussianNoise(), 0.0, 50, 2, 30, seed=9)
        assert result.trials == 30
        assert result.variance_across_trials > 0.0

    def test_end_to_end_variance_bound_formula(self):
        assert end_to_end_variance_bound(1.0, 2, 4) == pytest.approx(3.0)

    def test_end_to_end_variance_within_bound(self):
        t_max = 100
        var = end_to_end_variance(PETERSEN, GaussianNoise(), 0.0, t_max, None, 200, seed=10)
        assert var <= 1.3 * end_to_end_variance_bound(1.0, diameter(PETERSEN), t_max)

    def test_end_to_end_variance_needs_trials(self):
        with pytest.raises(DomainError):
            end_to_end_variance(PETERSEN, GaussianNoise(), 0.0, 50, None, 50, seed=0)

    @pytest.mark.slow
    def test_benchmark_network(self):
        g = benchmark_graph(75, seed=0)
        d = diameter(g)
        x0 = np.linspace(100.0, 200.0, 75)
        model = GaussianNoise()
        t_max = 400
        robust = robust_consensus_trials(g, x0, model, 0.0, t_max, d, 10, seed=11, threads=4)
        envelope = 3 * math.sqrt(end_to_end_variance_bound(1.0, d, t_max))
        assert abs(np.mean(robust.final_estimates) - 200.0) <= envelope

        fixed, erased = (
            run_noisy_max(g, x0, model, p, 30, rng).final.mean()
            for p, rng in zip((0.0, 0.5), trial_streams(11, 2))
        )
        assert fixed - 200.0 >= 10.0
        assert fixed > erased


class TestSoftMaxBaseline:
    """Test the average-consensus soft-max surrogate."""

    X0 = np.linspace(0.05, 0.95, 10)

    def test_soft_max(self):
        assert soft_max([0.0, 0.0], 1.0) == pytest.approx(math.log(2))
        assert soft_max([1.0, 3.0], 200.0) == pytest.approx(3.0, abs=1e-6)
        assert soft_max(self.X0, 6.0) > 0.95

    def test_metropolis_weights(self):
        w = metropolis_weights(PETERSEN)
        assert np.array_equal(w, w.T)
        assert np.allclose(w[PETERSEN.adjacency.astype(bool)], 0.25)
        assert (w.sum(axis=1) < 1.0).all()

    def test_noiseless_converges_to_soft_max(self):
        run = run_sma_baseline(PETERSEN, self.X0, NOISELESS, 6.0, 300, np.random.default_rng(0))
        assert np.allclose(run.final, soft_max(self.X0, 6.0), atol=1e-6)

    def test_initial_reconstruction(self):
        run = run_sma_baseline(PETERSEN, self.X0, NOISELESS, 6.0, 1, np.random.default_rng(0))
        assert np.allclose(run.states[0], self.X0 + math.log(10) / 6.0)

    def test_large_values_do_not_overflow(self):
        x0 = np.linspace(100.0, 200.0, 10)
        run = run_sma_baseline(PETERSEN, x0, GaussianNoise(), 10.0, 50, np.random.default_rng(1))
        assert np.isfinite(run.states).all()

    def test_noise_scales_with_transmitted_value(self, caplog):
        with caplog.at_level(logging.WARNING, logger="maxcons.consensus"):
            quiet = run_sma_baseline(PETERSEN, self.X0, GaussianNoise(1e-6), 6.0, 100, np.random.default_rng(2))
        assert "noise dominates" not in caplog.text
        assert np.allclose(quiet.final, soft_max(self.X0, 6.0), atol=0.05)

        with caplog.at_level(logging.WARNING, logger="maxcons.consensus"):
            run_sma_baseline(PETERSEN, self.X0, GaussianNoise(), 6.0, 100, np.random.default_rng(2))
        assert "noise dominates" in caplog.text

    def test_beta_trade_off(self):
        model = GaussianNoise(1e-4)
        runs = {
            beta: run_sma_baseline(PETERSEN, self.X0, model, beta, 300, rng, transmit_scale=100.0)
            for beta, rng in zip((6.0, 10.0), trial_streams(12, 2))
        }
        means = {beta: trajectory_statistics(run)[:, 1] for beta, run in runs.items()}
        assert settling_iteration(means[6.0]) < settling_iteration(means[10.0])
        bias = {beta: abs(series[-30:].mean() - 0.95) for beta, series in means.items()}
        assert bias[10.0] < bias[6.0]

    def test_invalid_beta(self):
        with pytest.raises(DomainError):
            run_sma_baseline(PETERSEN, self.X0, NOISELESS, 0.0, 5, np.random.default_rng(0))

    def test_invalid_transmit_scale(self):
        with pytest.raises(DomainError):
            run_sma_baseline(PETERSEN, self.X0, NOISELESS, 6.0, 5, np.random.default_rng(0), transmit_scale=-1.0)


class TestSettling:
    """Test the plateau-settling index."""

    def test_ramp_then_flat(self):
        series = [0.0, 0.5, 0.9] + [1.0] * 17
        assert settling_iteration(series) == 3

    def test_constant_series(self):
        assert settling_iteration([2.0] * 10) == 0

    def test_custom_tolerance(self):
        series = [0.0, 0.5, 0.9] + [1.0] * 17
        assert settling_iteration(series, tolerance=0.2) == 2


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
