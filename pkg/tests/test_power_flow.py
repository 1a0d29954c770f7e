import numpy as np
import pytest

from app.errors import ConvergenceError, DimensionError, SingularJacobianError
from app.models.opf import FlowStatus, GenSetpoints, Injections
from app.services.case_parser import parse_case
from app.services.power_flow import ac_power_flow, branch_flows
from tests.conftest import case_json


def test_case14_matches_published_solution(case14):
    sol = ac_power_flow(case14)
    assert sol.status == FlowStatus.CONVERGED
    assert sol.max_mismatch < 1e-8
    assert sol.iterations <= 6
    assert sol.v[13] == pytest.approx(1.036, abs=2e-3)
    assert np.degrees(sol.theta[13]) == pytest.approx(-16.03, abs=0.05)
    assert np.degrees(sol.theta[3]) == pytest.approx(-10.31, abs=0.05)
    # PV and slack magnitudes stay at their set-points
    for pos, vset in [(0, 1.06), (1, 1.045), (2, 1.01), (5, 1.07), (7, 1.09)]:
        assert sol.v[pos] == pytest.approx(vset, abs=1e-12)
    # slack supplies the remaining demand plus losses
    assert sol.p_inj[0] == pytest.approx(232.4, abs=0.5)


def test_wind_fixture_solves(case14_wind):
    inj = Injections(wind_p={3: 20.0, 4: 15.0, 5: 10.0}, wind_q={3: 5.0, 4: 4.0, 5: 3.0})
    sol = ac_power_flow(case14_wind, inj)
    assert sol.max_mismatch < 1e-8


def test_two_bus_lossless(two_bus_text):
    case = parse_case(two_bus_text)
    sol = ac_power_flow(case)
    assert sol.p_inj[0] == pytest.approx(50.0, abs=1e-6)
    assert sol.p_inj[1] == pytest.approx(-50.0, abs=1e-6)
    flows = branch_flows(case, sol.v, sol.theta)
    assert flows.p_cd[0] == pytest.approx(50.0, abs=1e-6)
    assert flows.p_to[0] == pytest.approx(-50.0, abs=1e-6)
    assert flows.s_cd[0] >= abs(flows.p_cd[0])
    assert flows.dv[0] == pytest.approx(1.0 - sol.v[1])


def test_load_override_changes_flow(two_bus_text):
    case = parse_case(two_bus_text)
    sol = ac_power_flow(case, Injections(load_p={2: 80.0}, load_q={2: 0.0}))
    assert sol.p_inj[0] == pytest.approx(80.0, abs=1e-6)


def test_gen_setpoints(case14):
    sp = GenSetpoints.from_case(case14)
    sol = ac_power_flow(case14, gen_setpoints=GenSetpoints(p=sp.p, v=np.where(sp.v > 1.05, 1.05, sp.v)))
    assert sol.v[7] == pytest.approx(1.05)


def test_islanded_network_is_singular():
    case = parse_case(case_json(
        buses=[{"id": 1, "bus_type": "slack"}, {"id": 2, "bus_type": "pq", "p_load": 10}],
        branches=[],
        gens=[{"bus": 1, "p_min": 0, "p_max": 100, "q_min": -50, "q_max": 50}],
    ))
    with pytest.raises(SingularJacobianError, match="singular Jacobian"):
        ac_power_flow(case)


def test_branch_flows_checks_dimensions(case14):
    with pytest.raises(DimensionError):
        branch_flows(case14, np.ones(3), np.zeros(3))


def test_deterministic(case14):
    a = ac_power_flow(case14)
    b = ac_power_flow(case14)
    assert np.array_equal(a.v, b.v)
    assert np.array_equal(a.theta, b.theta)


def test_two_bus_matches_closed_form(two_bus_text):
    # lossless line x=0.1 p.u. feeding 0.5 + j0.1 p.u. from a 1.0 p.u. slack
    theta, v = 0.0, 1.0
    for _ in range(100):
        theta = np.arcsin(-0.5 * 0.1 / v)
        v = (np.cos(theta) + np.sqrt(np.cos(theta) ** 2 - 4 * 0.1 * 0.1)) / 2
    sol = ac_power_flow(parse_case(two_bus_text))
    assert sol.theta[1] == pytest.approx(theta, abs=1e-7)
    assert sol.v[1] == pytest.approx(v, abs=1e-7)
    assert sol.q_inj[0] == pytest.approx(100 * (1 - v * np.cos(theta)) / 0.1, abs=1e-5)


def test_iteration_cap(case14):
    sol = ac_power_flow(case14, max_iter=1)
    assert sol.status == FlowStatus.MAX_ITER
    assert sol.iterations == 1
    with pytest.raises(ConvergenceError, match="did not converge in 1 iterations"):
        ac_power_flow(case14, max_iter=1, strict=True)
