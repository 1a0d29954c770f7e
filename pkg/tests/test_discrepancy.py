import numpy as np
import pytest

from app.errors import DataError, UsageError
from app.services.discrepancy import star_discrepancy_1d, star_discrepancy_grid
from app.services.uniform_streams import make_stream


def test_single_points():
    assert star_discrepancy_1d([0.5]) == pytest.approx(0.5)
    assert star_discrepancy_1d([0.0]) == pytest.approx(1.0)


def test_midpoint_rule():
    pts = (np.arange(10) + 0.5) / 10
    assert star_discrepancy_1d(pts) == pytest.approx(0.05)
    assert star_discrepancy_1d(pts[::-1]) == pytest.approx(0.05)


def test_grid_bracket_contains_exact_1d():
    pts = make_stream("srs", 1, seed=3).next_block(200)
    exact = star_discrepancy_1d(pts)
    lower, upper = star_discrepancy_grid(pts, resolution=64)
    assert lower == pytest.approx(exact, abs=1e-12)
    assert upper >= exact


def test_single_point_2d():
    lower, upper = star_discrepancy_grid(np.array([[0.5, 0.5]]), resolution=16)
    assert lower >= 0.75 - 1e-12
    assert upper >= lower


def test_sobol_beats_srs():
    sobol = star_discrepancy_1d(make_stream("sobol", 1, randomize=False).next_block(1024))
    srs = star_discrepancy_1d(make_stream("srs", 1, seed=0).next_block(1024))
    lhs = star_discrepancy_1d(make_stream("lhs", 1, seed=0, block_size=1024).next_block(1024))
    assert sobol < 0.003
    assert lhs <= 1 / 1024 + 1e-12
    assert srs > 0.01


def test_sobol_2d_bracket_is_tight():
    pts = make_stream("sobol", 2, randomize=False).next_block(256)
    lower, upper = star_discrepancy_grid(pts, resolution=128)
    assert 0 < lower <= upper
    assert upper < 0.05


def test_invalid_inputs():
    with pytest.raises(UsageError):
        star_discrepancy_1d([])
    with pytest.raises(DataError):
        star_discrepancy_1d([0.2, 1.5])
    with pytest.raises(UsageError):
        star_discrepancy_grid(np.full((4, 4), 0.5))
    with pytest.raises(UsageError):
        star_discrepancy_grid(np.full((4, 2), 0.5), resolution=0)


@pytest.mark.parametrize("n", [64, 128, 256, 512, 1024, 2048, 4096])
def test_sobol_below_mean_srs(n):
    sobol = star_discrepancy_1d(make_stream("sobol", 1, randomize=False).next_block(n))
    srs = np.mean([star_discrepancy_1d(make_stream("srs", 1, seed=s).next_block(n)) for s in range(20)])
    assert sobol < srs


def test_sobol_discrepancy_decay():
    for k in range(4, 13):
        n = 2 ** k
        d_star = star_discrepancy_1d(make_stream("sobol", 1, randomize=False).next_block(n))
        assert d_star * n / np.log(n) <= 1.0


def test_scrambled_sobol_is_a_net():
    # every aligned block of 2^k scrambled points holds one point per 1/2^k interval
    pts = make_stream("sobol", 1, seed=11, block_size=1024).next_block(1024)
    assert star_discrepancy_1d(pts) <= 1 / 1024 + 1e-12
