import numpy as np
import pytest
from hypothesis import given, strategies as st

from psnspd.detector_model import build_p_matrix
from psnspd.photon_sources import ClickStatistics, forward_map, poisson_statistics
from psnspd.uncertainty import (
    PAPER_BUDGET,
    FluxErrorBudget,
    TooManyDiscardedError,
    flux_relative_uncertainty,
    matrix_uncertainty,
    resample_click_counts,
    resample_mu,
)

from conftest import DEVICE_ETAS

budgets = st.builds(FluxErrorBudget, st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.5))


def device_clicks(mu=0.5):
    return forward_map(build_p_matrix(DEVICE_ETAS, 9), poisson_statistics(mu, 9))


class TestFluxBudget:

    def test_device_budget(self):
        assert flux_relative_uncertainty(FluxErrorBudget(0.0252, 0.0019, 0.0012)) == pytest.approx(
            0.0253, abs=0.0002)

    def test_zero(self):
        assert flux_relative_uncertainty(FluxErrorBudget(0, 0, 0)) == 0.0

    def test_single_term(self):
        assert flux_relative_uncertainty(FluxErrorBudget(0.03, 0, 0)) == pytest.approx(0.03)

    def test_attenuators_count_three_times(self):
        assert flux_relative_uncertainty(FluxErrorBudget(0, 0, 0.01)) == pytest.approx(
            0.01 * np.sqrt(3))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            FluxErrorBudget(-0.01, 0, 0)

    @given(budgets, st.sampled_from(["sigma_pm_rel", "sigma_op_rel", "sigma_at_rel"]),
           st.floats(0, 0.5))
    def test_monotone(self, budget, name, extra):
        bigger = FluxErrorBudget(**{**budget.to_dict(), name: getattr(budget, name) + extra})
        assert flux_relative_uncertainty(bigger) >= flux_relative_uncertainty(budget)


class TestResampleCounts:

    def test_degenerate(self):
        for seed in range(5):
            q = resample_click_counts(ClickStatistics([1, 0, 0, 0, 0]), 1000, seed)
            np.testing.assert_array_equal(q.probs, [1, 0, 0, 0, 0])

    def test_binomial_spread(self):
        n_t = 1_000_000
        q = resample_click_counts(ClickStatistics([0.3, 0.5, 0.2]), n_t, 1)
        assert abs(q.probs[1] - 0.5) < 4 * np.sqrt(0.25 / n_t)
        assert q.probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_seeded(self):
        q = device_clicks()
        a = resample_click_counts(q, 10_000, 123)
        b = resample_click_counts(q, 10_000, 123)
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_overshoot_redrawn(self):
        # independent classes at 0.5 each overshoot n_t about half the time
        for seed in range(20):
            q = resample_click_counts(ClickStatistics([0.0, 0.5, 0.5]), 10, seed)
            assert q.probs[0] >= 0

    def test_invalid_trials(self):
        with pytest.raises(ValueError):
            resample_click_counts(device_clicks(), 0)


class TestResampleMu:

    def test_no_spread(self):
        assert resample_mu(0.7, 0.0, 1) == 0.7

    def test_vacuum(self):
        assert resample_mu(0.0, 0.1, 1) == 0.0

    def test_gaussian_statistics(self):
        rng = np.random.default_rng(8)
        draws = np.array([resample_mu(0.5, 0.0253, rng) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(0.5, abs=0.0005)
        assert draws.std() == pytest.approx(0.01265, rel=0.05)

    def test_never_negative(self):
        rng = np.random.default_rng(0)
        assert min(resample_mu(1.0, 2.0, rng) for _ in range(2000)) >= 0


class TestMatrixUncertainty:

    @pytest.fixture(scope="class")
    @classmethod
    def small_run(cls):
        return matrix_uncertainty(device_clicks(), 0.5, n_mc_sets=12, n_trials_per_set=10_000_000,
                                  budget=PAPER_BUDGET, seed=4)

    def test_shapes_and_invariants(self, small_run):
        u = small_run
        assert u.sigma_matrix.shape == u.mean_matrix.shape == (5, 10)
        assert np.all(u.sigma_matrix >= 0)
        np.testing.assert_allclose(u.mean_matrix.entries.sum(axis=0), 1.0, atol=1e-9)
        assert u.n_trials + u.n_discarded == 12

    def test_structural_zeros(self, small_run):
        n, m = np.indices(small_run.sigma_matrix.shape)
        assert np.all(small_run.sigma_matrix[n > m] == 0.0)
        assert small_run.sigma_matrix[0, 0] == 0.0
        assert np.all(small_run.sigma_matrix[n <= m][1:] > 0)

    def test_etas_sorted(self, small_run):
        assert np.all(np.diff(small_run.etas_mean) >= 0)
        assert small_run.etas_sigma.shape == (4,)

    def test_noise_free_limit(self):
        # count noise alone still moves high-m entries by ~5e-3 at 1e8 trials
        kw = dict(n_mc_sets=5, budget=FluxErrorBudget(0, 0, 0), seed=1)
        coarse = matrix_uncertainty(device_clicks(), 0.5, n_trials_per_set=10**8, **kw)
        fine = matrix_uncertainty(device_clicks(), 0.5, n_trials_per_set=10**10, **kw)
        assert fine.sigma_matrix.max() < 1e-3
        ratio = coarse.sigma_matrix.max() / fine.sigma_matrix.max()
        assert 10 / 3 < ratio < 30

    def test_reproducible_and_schedule_independent(self):
        kw = dict(n_mc_sets=3, n_trials_per_set=1_000_000, seed=9)
        a = matrix_uncertainty(device_clicks(), 0.5, **kw)
        b = matrix_uncertainty(device_clicks(), 0.5, workers=2, **kw)
        np.testing.assert_array_equal(a.sigma_matrix, b.sigma_matrix)
        np.testing.assert_array_equal(a.etas_mean, b.etas_mean)

    def test_needs_two_sets(self):
        with pytest.raises(ValueError):
            matrix_uncertainty(device_clicks(), 0.5, n_mc_sets=1)

    def test_unidentifiable_source_discarded(self):
        with pytest.raises(TooManyDiscardedError):
            matrix_uncertainty(ClickStatistics([1, 0, 0, 0, 0]), 0.0, n_mc_sets=3,
                               n_trials_per_set=100)

    def test_json_schema(self, small_run):
        d = small_run.to_dict()
        assert set(d) == {"mean_matrix", "sigma_matrix", "etas_mean_sorted", "etas_sigma_sorted",
                          "n_trials", "n_discarded"}


@pytest.mark.slow
def test_flux_error_sets_relative_efficiency_spread():
    # Poisson thinning: click statistics depend on mu * eta_i only, so with
    # negligible count noise every fitted eta scales as 1 / mu'
    u = matrix_uncertainty(device_clicks(), 0.5, n_mc_sets=30, n_trials_per_set=10**13,
                           budget=PAPER_BUDGET, seed=2)
    rel = u.etas_sigma / u.etas_mean
    target = flux_relative_uncertainty(PAPER_BUDGET)
    assert np.all((rel > 0.6 * target) & (rel < 1.5 * target))
    # common scale factor: relative spreads agree across pixels
    assert rel.max() / rel.min() < 1.05
