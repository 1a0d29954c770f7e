import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from app.errors import DimensionError, UsageError, ZeroDensityError
from app.models.sampling import ChainState, MhConfig, StreamKind, UniformStream
from app.services.mh_sampler import (
    acceptance_rate, initial_state, mh_step, mixture_log_target, normal_increments, run_chain,
)
from app.services.mixture_model import log_pdf
from app.services.uniform_streams import make_stream


class ScriptedStream(UniformStream):
    """Replays fixed points."""
    kind = StreamKind.SRS

    def __init__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        super().__init__(points.shape[1])
        self._points = points

    def _draw(self, n):
        return self._points[self.points_emitted:self.points_emitted + n]


def _ramp(x):
    return float(x[0])


def _mixture_cdf(x):
    return 0.5 * stats.norm.cdf(x, 0.3, 0.05) + 0.5 * stats.norm.cdf(x, 0.7, 0.05)


def test_zero_uniform_maps_to_finite_increment():
    z = normal_increments(np.array([0.0, 0.5]))
    assert np.isfinite(z[0]) and z[0] < -6
    assert z[1] == 0.0


def test_accept_test_uses_last_coordinate():
    u_down = ndtr(-1.0)
    for z_hat, accepted in [(0.49, True), (0.51, False)]:
        cfg = MhConfig(dim=1, stream=ScriptedStream([[u_down, z_hat]]), proposal_scale=0.4)
        state = mh_step(ChainState(np.array([0.8]), np.log(0.8)), _ramp, cfg)
        assert state.proposed == 1
        assert state.accepted == int(accepted)
        expected = 0.4 if accepted else 0.8
        assert state.x[0] == pytest.approx(expected, abs=1e-12)


def test_uphill_moves_always_accepted():
    cfg = MhConfig(dim=1, stream=ScriptedStream([[ndtr(1.0), 0.999]]), proposal_scale=0.1)
    state = mh_step(ChainState(np.array([0.5]), np.log(0.5)), _ramp, cfg)
    assert state.x[0] == pytest.approx(0.6)
    assert acceptance_rate(state) == 1.0


def test_outside_support_is_rejected():
    cfg = MhConfig(dim=1, stream=ScriptedStream([[0.975, 0.0]]), proposal_scale=0.1)
    state = mh_step(ChainState(np.array([0.95]), np.log(0.95)), _ramp, cfg)
    assert state.x[0] == 0.95
    assert state.accepted == 0


def test_config_checks():
    with pytest.raises(DimensionError):
        MhConfig(dim=2, stream=make_stream("srs", 2))
    with pytest.raises(UsageError):
        MhConfig(dim=1, stream=make_stream("srs", 2), thin=0)
    with pytest.raises(ZeroDensityError):
        initial_state(_ramp, MhConfig(dim=1, stream=make_stream("srs", 2)), [0.0])
    with pytest.raises(UsageError):
        acceptance_rate(ChainState(np.array([0.5]), 0.0))


def test_stream_consumption_and_thinning():
    cfg = MhConfig(dim=2, stream=make_stream("sobol", 3), burn_in=10, n_samples=20, thin=2)
    samples, diag = run_chain(lambda x: 1.0, cfg, [0.5, 0.5])
    assert samples.shape == (20, 2)
    assert diag.coordinates_consumed == (10 + 40) * 3
    assert cfg.stream.points_emitted == 50
    assert 0 <= diag.acceptance_rate <= 1
    assert diag.stream_kind == "sobol"


@pytest.mark.parametrize("kind", ["srs", "lhs", "sobol"])
def test_chains_are_reproducible(kind, bimodal_1d):
    target = mixture_log_target(bimodal_1d)

    def run():
        cfg = MhConfig(dim=1, stream=make_stream(kind, 2, seed=4, block_size=64),
                       proposal_scale=0.3, burn_in=100, n_samples=300)
        return run_chain(target, cfg, [0.5], log_target=True)[0]
    assert np.array_equal(run(), run())


def test_fast_log_target_matches_mixture(bimodal_1d):
    target = mixture_log_target(bimodal_1d)
    for x in (0.1, 0.3, 0.5, 0.93):
        assert target(np.array([x])) == pytest.approx(log_pdf(bimodal_1d, x), rel=1e-12)


def test_auto_tune_shrinks_a_wide_proposal(bimodal_1d):
    cfg = MhConfig(dim=1, stream=make_stream("srs", 2, seed=1), proposal_scale=5.0,
                   burn_in=1000, n_samples=10, auto_tune=True)
    _, diag = run_chain(mixture_log_target(bimodal_1d), cfg, [0.3], log_target=True)
    assert diag.proposal_scale[0] < 5.0


@pytest.mark.parametrize("kind", ["srs", "lhs", "sobol"])
def test_bimodal_chain_matches_target(kind, bimodal_1d):
    cfg = MhConfig(dim=1, stream=make_stream(kind, 2, seed=8, shuffle=True), proposal_scale=0.4,
                   burn_in=1000, n_samples=50000, thin=10)
    samples, diag = run_chain(mixture_log_target(bimodal_1d), cfg, [0.3], log_target=True)
    assert stats.kstest(samples[:, 0], _mixture_cdf).statistic < 0.015
    assert diag.per_dim_mean[0] == pytest.approx(0.5, abs=0.005)


def test_sobol_replicates_track_srs_error(bimodal_1d):
    target = mixture_log_target(bimodal_1d)

    def mae(kind):
        errors = []
        for seed in range(20):
            cfg = MhConfig(dim=1, stream=make_stream(kind, 2, seed=seed, shuffle=True),
                           proposal_scale=0.4, burn_in=1000, n_samples=2000)
            samples, _ = run_chain(target, cfg, [0.5], log_target=True)
            errors.append(abs(samples.mean() - 0.5))
        return np.mean(errors)

    sobol, srs = mae("sobol"), mae("srs")
    assert sobol < 0.03
    assert sobol < 2 * srs


@pytest.mark.parametrize("kind", ["srs", "lhs", "sobol"])
def test_chain_replays_from_checkpoint(kind, bimodal_1d):
    target = mixture_log_target(bimodal_1d)

    def config(skip=0):
        stream = make_stream(kind, 2, seed=13, skip=skip, block_size=64, shuffle=True)
        return MhConfig(dim=1, stream=stream, proposal_scale=0.3)

    cfg = config()
    state = initial_state(target, cfg, [0.3], log_target=True)
    path = []
    for _ in range(150):
        state = mh_step(state, target, cfg, log_target=True)
        path.append(state)

    resumed_cfg = config(skip=70)
    resumed = path[69]
    for expected in path[70:]:
        resumed = mh_step(resumed, target, resumed_cfg, log_target=True)
        assert np.array_equal(resumed.x, expected.x)
        assert resumed.log_p == expected.log_p
        assert resumed.accepted == expected.accepted


def test_discretized_detailed_balance():
    def bump(x):
        return np.exp(-0.5 * ((x[0] - 0.5) / 0.15) ** 2)

    cfg = MhConfig(dim=1, stream=make_stream("srs", 2, seed=21), proposal_scale=0.1,
                   burn_in=500, n_samples=100000)
    samples, _ = run_chain(bump, cfg, [0.5])
    bins = np.minimum((samples[:, 0] * 10).astype(int), 9)
    flux = np.zeros((10, 10))
    np.add.at(flux, (bins[:-1], bins[1:]), 1.0)
    for i in range(10):
        for j in range(i + 1, min(i + 3, 10)):
            a, b = flux[i, j], flux[j, i]
            assert abs(a - b) <= 5 * np.sqrt(a + b) + 2
