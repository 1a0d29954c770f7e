import json
from pathlib import Path

import numpy as np
import pytest

from app.models.mixture import GaussianMixture
from app.models.popf import FarmGroup, PopfConfig, SamplerSettings
from app.models.wind_farm import WindFarm
from app.services.case_parser import parse_case
from storage.artifacts import load_case

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def case_json(buses, branches, gens, base_mva=100.0):
    return json.dumps({"schema_version": 1, "base_mva": base_mva,
                       "buses": buses, "branches": branches, "gens": gens})


TWO_BUS_M = """
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 100 -100 1 100 1 200 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1;
];
mpc.gencost = [
  2 0 0 3 0.01 10 0;
];
"""


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def two_bus_text():
    return TWO_BUS_M


@pytest.fixture(scope="session")
def case14():
    return load_case(FIXTURES / "case14.m")


@pytest.fixture(scope="session")
def case14_wind():
    return load_case(FIXTURES / "case14_wind.m")


@pytest.fixture(scope="session")
def case118():
    return load_case(FIXTURES / "case118.m")


@pytest.fixture
def three_bus_lossless():
    """Two generators feeding a 100 MW load; economic dispatch is (60, 40)."""
    return parse_case(case_json(
        buses=[{"id": 1, "bus_type": "slack"}, {"id": 2, "bus_type": "pv"},
               {"id": 3, "bus_type": "pq", "p_load": 100.0, "q_load": 20.0}],
        branches=[{"from_bus": 1, "to_bus": 2, "r": 0.0, "x": 0.1},
                  {"from_bus": 1, "to_bus": 3, "r": 0.0, "x": 0.1},
                  {"from_bus": 2, "to_bus": 3, "r": 0.0, "x": 0.1}],
        gens=[{"bus": 1, "p_min": 0, "p_max": 200, "q_min": -100, "q_max": 100,
               "cost": {"a": 0, "b": 10, "c": 0.05}},
              {"bus": 2, "p_min": 0, "p_max": 200, "q_min": -100, "q_max": 100,
               "cost": {"a": 0, "b": 12, "c": 0.05}}],
    ))


@pytest.fixture
def three_bus_lossy():
    """Generator voltages pinned to 1 p.u. so dispatch is the only degree of freedom."""
    return parse_case(case_json(
        buses=[{"id": 1, "bus_type": "slack", "v_min": 1.0, "v_max": 1.0},
               {"id": 2, "bus_type": "pv", "v_min": 1.0, "v_max": 1.0},
               {"id": 3, "bus_type": "pq", "p_load": 100.0, "q_load": 20.0, "v_min": 0.8, "v_max": 1.2}],
        branches=[{"from_bus": 1, "to_bus": 2, "r": 0.02, "x": 0.1},
                  {"from_bus": 1, "to_bus": 3, "r": 0.02, "x": 0.1},
                  {"from_bus": 2, "to_bus": 3, "r": 0.02, "x": 0.1}],
        gens=[{"bus": 1, "p_min": 0, "p_max": 200, "q_min": -200, "q_max": 200,
               "cost": {"a": 0, "b": 10, "c": 0.05}, "v_set": 1.0},
              {"bus": 2, "p_min": 0, "p_max": 200, "q_min": -200, "q_max": 200,
               "cost": {"a": 0, "b": 12, "c": 0.05}, "v_set": 1.0}],
    ))


@pytest.fixture
def bimodal_1d():
    return GaussianMixture(np.array([0.5, 0.5]), np.array([[0.3], [0.7]]),
                           np.array([[[0.0025]], [[0.0025]]]))


@pytest.fixture
def popf_config(three_bus_lossless):
    """Small DC run: one farm on the load bus driven by a 1-D mixture."""
    def make(**overrides):
        mixture = overrides.pop("mixture", GaussianMixture(
            np.array([0.6, 0.4]), np.array([[0.35], [0.65]]), np.array([[[0.01]], [[0.008]]])))
        farm = overrides.pop("farm", WindFarm(bus=3, speed_min=0.0, speed_max=20.0, name="WF"))
        sampler = overrides.pop("sampler", SamplerSettings(burn_in=50))
        args = dict(case=three_bus_lossless, farm_groups=[FarmGroup("g", mixture, [farm])],
                    sampler=sampler, n_samples=8, solver="dc", seed=3)
        args.update(overrides)
        return PopfConfig(**args)
    return make
