import numpy as np
import pandas as pd
import pytest
from scipy import integrate, stats

from app.errors import CholeskyError, DataError, DegenerateDataError, DimensionError, UsageError
from app.models.mixture import EmOptions, GaussianMixture
from app.services.mixture_model import (
    fit_em, log_likelihood, log_pdf, pdf, sample_direct, select_components,
)


@pytest.fixture
def correlated_2d():
    cov = np.array([[0.04, 0.018], [0.018, 0.0225]])
    return GaussianMixture(np.array([1.0]), np.array([[0.4, 0.6]]), cov[None])


def test_single_component_matches_scipy(correlated_2d):
    ref = stats.multivariate_normal(mean=[0.4, 0.6], cov=correlated_2d.covariances[0])
    pts = np.array([[0.4, 0.6], [0.1, 0.9], [0.8, 0.2]])
    assert pdf(correlated_2d, pts) == pytest.approx(ref.pdf(pts), rel=1e-10)
    assert isinstance(pdf(correlated_2d, [0.4, 0.6]), float)


def test_bimodal_density(bimodal_1d):
    expected = 0.5 * stats.norm.pdf(0.45, 0.3, 0.05) + 0.5 * stats.norm.pdf(0.45, 0.7, 0.05)
    assert pdf(bimodal_1d, 0.45) == pytest.approx(expected, rel=1e-10)
    total, _ = integrate.quad(lambda x: pdf(bimodal_1d, x), -1.0, 2.0, points=[0.3, 0.7], limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_far_tail_stays_finite(bimodal_1d):
    value = log_pdf(bimodal_1d, 50.0)
    assert np.isfinite(value)
    assert value < -1e5


def test_dimension_mismatch(correlated_2d):
    with pytest.raises(DimensionError):
        pdf(correlated_2d, np.zeros((4, 3)))


def test_invalid_mixtures():
    with pytest.raises(DataError, match="sum to 1"):
        GaussianMixture(np.array([0.5, 0.4]), np.array([[0.0], [1.0]]), np.ones((2, 1, 1)))
    with pytest.raises(DataError, match="symmetric"):
        GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.array([[[1.0, 0.5], [0.0, 1.0]]]))
    with pytest.raises(DataError, match="positive"):
        GaussianMixture(np.array([1.0, 0.0]), np.zeros((2, 1)), np.ones((2, 1, 1)))


def test_non_positive_definite_covariance():
    model = GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.array([[[1.0, 2.0], [2.0, 1.0]]]))
    with pytest.raises(CholeskyError):
        pdf(model, [0.0, 0.0])


def test_log_likelihood_is_additive(correlated_2d):
    pts = np.random.default_rng(3).uniform(0.0, 1.0, size=(50, 2))
    single = log_likelihood(correlated_2d, pts)
    assert log_likelihood(correlated_2d, np.vstack([pts, pts])) == pytest.approx(2 * single, rel=1e-12)


def test_dict_form_is_exact(correlated_2d):
    again = GaussianMixture.from_dict(correlated_2d.to_dict())
    assert again == correlated_2d


def test_direct_sampling_moments(bimodal_1d):
    x = sample_direct(bimodal_1d, 20000, seed=11)
    assert x.shape == (20000, 1)
    assert x.mean() == pytest.approx(0.5, abs=0.005)
    assert x.var() == pytest.approx(0.0025 + 0.04, rel=0.03)
    assert np.array_equal(x, sample_direct(bimodal_1d, 20000, seed=11))


def test_em_recovers_bimodal(bimodal_1d):
    data = sample_direct(bimodal_1d, 4000, seed=1)
    fit = fit_em(data, 2, EmOptions(seed=0))
    order = np.argsort(fit.model.means[:, 0])
    model = fit.model.relabel(order)
    assert model.means[:, 0] == pytest.approx([0.3, 0.7], abs=0.01)
    assert model.weights == pytest.approx([0.5, 0.5], abs=0.03)
    assert np.sqrt(model.covariances[:, 0, 0]) == pytest.approx([0.05, 0.05], rel=0.1)
    assert fit.log_likelihood == pytest.approx(log_likelihood(fit.model, data), rel=1e-12)


def test_em_trace_is_monotone(fixtures_dir):
    data = pd.read_csv(fixtures_dir / "wind_3farms.csv").drop(columns="timestamp").to_numpy()
    data = (data - data.min(axis=0)) / np.ptp(data, axis=0)
    fit = fit_em(data, 3, EmOptions(seed=4, max_iter=200))
    trace = np.array(fit.trace)
    assert len(trace) == fit.iterations + 1
    assert np.all(np.diff(trace) >= -1e-9)


def test_em_is_deterministic(bimodal_1d):
    data = sample_direct(bimodal_1d, 500, seed=2)
    opts = EmOptions(seed=9, restarts=3)
    assert fit_em(data, 2, opts).model == fit_em(data, 2, opts).model


def test_random_restart_init(bimodal_1d):
    data = sample_direct(bimodal_1d, 1000, seed=3)
    fit = fit_em(data, 2, EmOptions(init="random_restart", restarts=4, seed=1))
    assert sorted(fit.model.means[:, 0]) == pytest.approx([0.3, 0.7], abs=0.02)


def test_em_input_checks():
    with pytest.raises(UsageError):
        fit_em(np.zeros((2, 1)), 3)
    with pytest.raises(DataError):
        fit_em(np.array([[0.1], [np.nan], [0.3]]), 1)
    with pytest.raises(DegenerateDataError):
        fit_em(np.full((20, 2), 0.5), 2, EmOptions(reg_eps=0.0))
    with pytest.raises(UsageError):
        EmOptions(rel_tol=0)


def test_identical_points_with_floor_fit():
    fit = fit_em(np.full((20, 2), 0.5), 1, EmOptions(reg_eps=1e-6))
    assert fit.model.means[0] == pytest.approx([0.5, 0.5])
    assert np.linalg.eigvalsh(fit.model.covariances[0]).min() >= 1e-6 * (1 - 1e-9)


def test_bic_selects_two_components(bimodal_1d):
    data = sample_direct(bimodal_1d, 2000, seed=5)
    best, table = select_components(data, range(1, 5), EmOptions(seed=0, restarts=2))
    assert best == 2
    assert list(table.columns) == ["M", "log_likelihood", "bic"]
    assert list(table["M"]) == [1, 2, 3, 4]


@pytest.mark.slow
def test_em_trace_monotone_on_random_datasets():
    rng = np.random.Generator(np.random.Philox(17))
    for k in range(100):
        m = int(rng.integers(1, 5))
        d = int(rng.integers(1, 4))
        centers = rng.random((m, d))
        data = np.vstack([c + 0.05 * rng.standard_normal((200, d)) for c in centers])
        fit = fit_em(data, m, EmOptions(seed=k, max_iter=300))
        trace = np.array(fit.trace)
        assert np.all(np.diff(trace) >= -1e-9)


def test_component_order_does_not_change_density():
    model = GaussianMixture(np.array([0.2, 0.5, 0.3]), np.array([[0.1, 0.2], [0.5, 0.5], [0.8, 0.3]]),
                            np.array([np.eye(2) * 0.01, [[0.02, 0.01], [0.01, 0.03]], np.eye(2) * 0.04]))
    pts = np.random.default_rng(5).uniform(0.0, 1.0, size=(200, 2))
    for order in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
        assert pdf(model.relabel(order), pts) == pytest.approx(pdf(model, pts), rel=1e-12)


def test_em_recovers_strong_correlation():
    truth = GaussianMixture(np.array([1.0]), np.array([[0.5, 0.5]]),
                            np.array([[[0.01, 0.008], [0.008, 0.01]]]))
    data = sample_direct(truth, 5000, seed=21)
    cov = fit_em(data, 1, EmOptions(seed=0)).model.covariances[0]
    assert cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]) == pytest.approx(0.8, abs=0.02)
    assert cov == pytest.approx(truth.covariances[0], rel=0.1)


def test_direct_sampling_component_frequencies():
    model = GaussianMixture(np.array([0.3, 0.7]), np.array([[0.0], [10.0]]), np.full((2, 1, 1), 0.01))
    x = sample_direct(model, 100000, seed=8)
    assert 0.29 <= np.mean(x[:, 0] < 5.0) <= 0.31
