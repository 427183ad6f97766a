import numpy as np
import pytest

from psnspd.detector_model import build_p_matrix
from psnspd.efficiency_fit import (
    FitOptions,
    estimate_total_efficiency,
    fit_efficiencies,
    fit_efficiencies_joint,
    residual_norm,
)
from psnspd.mc_simulator import SimulationConfig, simulate_pulses
from psnspd.photon_sources import ClickStatistics, forward_map, poisson_statistics
from psnspd.uncertainty import resample_click_counts

from conftest import DEVICE_ETAS, random_etas


def exact_clicks(etas, mu, max_photons=9):
    return forward_map(build_p_matrix(etas, max_photons), poisson_statistics(mu, max_photons))


@pytest.fixture(scope="module")
def device_fit():
    s = poisson_statistics(0.5, 9)
    return fit_efficiencies(exact_clicks(DEVICE_ETAS, 0.5), s)


def test_noise_free_recovery(device_fit):
    np.testing.assert_allclose(device_fit.etas.etas, np.sort(DEVICE_ETAS), atol=1e-3)
    assert device_fit.residual_norm < 1e-8
    assert device_fit.converged
    assert device_fit.n_restarts_used == 17


def test_reported_sorted(device_fit):
    assert np.all(np.diff(device_fit.etas.etas) >= 0)


def test_total_matches_single_photon_click_probability(device_fit):
    p = build_p_matrix(device_fit.etas, 9)
    assert device_fit.etas.total == pytest.approx(p[1, 1], abs=1e-15)
    assert device_fit.etas.total == pytest.approx(0.9241, abs=0.01)


def test_returned_residual_not_worse_than_any_start(device_fit):
    assert all(device_fit.residual_norm <= r for r in device_fit.start_residuals)


def test_blind_detector():
    fit = fit_efficiencies(ClickStatistics([1, 0, 0, 0, 0]), poisson_statistics(0.5, 9))
    np.testing.assert_allclose(fit.etas.etas, 0.0, atol=1e-8)
    assert fit.residual_norm < 1e-8


def test_vacuum_source_not_converged():
    fit = fit_efficiencies(ClickStatistics([1, 0, 0, 0, 0]), poisson_statistics(0.0, 9))
    assert not fit.converged


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        fit_efficiencies(ClickStatistics([0.5, 0.5]), poisson_statistics(0.5, 9), n_pixels=4)


def test_simulated_counts():
    hist = simulate_pulses(SimulationConfig(DEVICE_ETAS, 10_000_000, seed=0, mu=0.5))
    fit = fit_efficiencies(hist.frequencies(), poisson_statistics(0.5, 9))
    np.testing.assert_allclose(fit.etas.etas, np.sort(DEVICE_ETAS), atol=0.01)


@pytest.mark.slow
def test_count_noise_spread():
    # 0.01 is near the 90th percentile of the max error at 1e7 pulses; the two
    # small efficiencies hinge on a few hundred 4-click events
    s = poisson_statistics(0.5, 9)
    q = exact_clicks(DEVICE_ETAS, 0.5)
    options = FitOptions(n_restarts=2, extra_starts=(tuple(DEVICE_ETAS),))
    errors = []
    for i in range(30):
        q_i = resample_click_counts(q, 10_000_000, i)
        fit = fit_efficiencies(q_i, s, options=options)
        errors.append(np.abs(fit.etas.etas - np.sort(DEVICE_ETAS)).max())
    assert np.mean(np.array(errors) < 0.01) >= 0.7
    assert np.median(errors) < 0.006


@pytest.mark.parametrize("seed", range(3))
def test_random_round_trip(seed):
    rng = np.random.default_rng(seed)
    n_pix = int(rng.integers(1, 5))
    etas = random_etas(rng, n_pix, total=rng.uniform(0.3, 0.95))
    mu = float(rng.uniform(0.3, 2.0))
    fit = fit_efficiencies(exact_clicks(etas, mu), poisson_statistics(mu, 9),
                           options=FitOptions(n_restarts=8, seed=seed))
    np.testing.assert_allclose(fit.etas.etas, np.sort(etas), atol=1e-3)


def test_joint_fit():
    pairs = [(exact_clicks(DEVICE_ETAS, mu), poisson_statistics(mu, 9)) for mu in (0.1, 0.5, 2.0)]
    fit = fit_efficiencies_joint(pairs, 4, FitOptions(n_restarts=4))
    np.testing.assert_allclose(fit.etas.etas, np.sort(DEVICE_ETAS), atol=1e-3)
    assert fit.residual_norm < 1e-8


def test_deterministic_given_seed():
    q = exact_clicks([0.1, 0.3], 0.8)
    s = poisson_statistics(0.8, 9)
    a = fit_efficiencies(q, s, options=FitOptions(n_restarts=3, seed=5))
    b = fit_efficiencies(q, s, options=FitOptions(n_restarts=3, seed=5))
    np.testing.assert_array_equal(a.etas.etas, b.etas.etas)
    assert a.residual_norm == b.residual_norm


def test_total_efficiency_estimate():
    q = exact_clicks(DEVICE_ETAS, 0.5)
    assert estimate_total_efficiency(q, poisson_statistics(0.5, 9)) == pytest.approx(
        DEVICE_ETAS.sum(), abs=1e-9)


def test_residual_norm():
    q = exact_clicks(DEVICE_ETAS, 0.5)
    assert residual_norm(q, poisson_statistics(0.5, 9), DEVICE_ETAS) < 1e-15
    assert residual_norm(q, poisson_statistics(0.5, 9), [0.1, 0.1, 0.1, 0.1]) > 0.01


def test_json_schema(device_fit):
    d = device_fit.to_dict()
    assert set(d) == {"etas_sorted", "residual_norm", "converged", "n_restarts_used"}
