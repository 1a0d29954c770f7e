import numpy as np
import pandas as pd
import pytest

from app.errors import DataError, WindDataError
from app.models.wind_farm import TurbineModel, WindFarm
from app.services.wind_power import denormalize, farm_output, normalize_columns, power_curve

TURBINE = TurbineModel()


@pytest.mark.parametrize("v, expected", [
    (0.0, 0.0), (2.0, 0.0), (7.0, 0.97384), (12.0, 5.0), (17.99, 5.0), (18.0, 0.0), (30.0, 0.0),
])
def test_cubic_curve(v, expected):
    assert power_curve(v, TURBINE) == pytest.approx(expected, abs=1e-5)


def test_linear_curve():
    t = TurbineModel(ramp="linear")
    assert power_curve(7.0, t) == pytest.approx(2.5)
    assert power_curve(np.array([1.0, 12.0]), t).tolist() == [0.0, 5.0]


def test_curve_is_monotone_on_ramp():
    v = np.linspace(2.0, 12.0, 200)
    assert np.all(np.diff(power_curve(v, TURBINE)) > 0)


def test_negative_speed_rejected():
    with pytest.raises(DataError):
        power_curve(-1.0, TURBINE)


def test_farm_output_power_factor():
    farm = WindFarm(bus=3, speed_min=0, speed_max=20, n_turbines=10, power_factor=0.8)
    p, q = farm_output(12.0, farm)
    assert p == pytest.approx(50.0)
    assert q == pytest.approx(37.5)
    p, q = farm_output(np.array([0.0, 7.0]), farm)
    assert p == pytest.approx([0.0, 9.7384], abs=1e-4)


def test_denormalize():
    farm = WindFarm(bus=1, speed_min=0.5, speed_max=20.5)
    assert denormalize(0.0, farm) == 0.5
    assert denormalize(np.array([0.5, 1.0]), farm).tolist() == [10.5, 20.5]
    with pytest.raises(DataError):
        denormalize(1.2, farm)


def test_farm_validation():
    with pytest.raises(DataError):
        WindFarm(bus=1, speed_min=5, speed_max=5)
    with pytest.raises(DataError):
        WindFarm(bus=1, speed_min=0, speed_max=1, power_factor=0.0)
    with pytest.raises(DataError):
        TurbineModel(v_in=12, v_r=10)


def test_normalize_columns():
    df = pd.DataFrame({"a": [2.0, 4.0, 6.0], "b": [1.0, 1.0, 3.0]})
    out, bounds = normalize_columns(df)
    assert bounds == {"a": (2.0, 6.0), "b": (1.0, 3.0)}
    assert out["a"].tolist() == [0.0, 0.5, 1.0]
    assert out["b"].tolist() == [0.0, 0.0, 1.0]


def test_constant_column():
    df = pd.DataFrame({"a": [3.0, 3.0]})
    with pytest.raises(WindDataError, match="degenerate"):
        normalize_columns(df)
    out, bounds = normalize_columns(df, allow_constant=True)
    assert bounds["a"] == (3.0, 4.0)
    assert out["a"].tolist() == [0.0, 0.0]
