"""
Full Newton-Raphson AC power flow in polar coordinates, and branch flow
evaluation for a given voltage profile.
"""
import logging
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from app.errors import ConvergenceError, DimensionError, SingularJacobianError
from app.models.network import BusType, NetworkCase
from app.models.opf import BranchFlows, FlowSolution, FlowStatus, GenSetpoints, Injections
from app.services.admittance import branch_matrices
from app.services.derivatives import dsbus_dv

logger = logging.getLogger(__name__)

PF_TOLERANCE = 1e-8     # max |mismatch|, p.u.
PF_MAX_ITER = 30


def _bus_classes(case: NetworkCase):
    """Positions of (slack, pv, pq) buses; PV buses without an in-service gen act as PQ."""
    gen_buses = {case.bus_position(case.gens[k].bus) for k in case.active_gens()}
    ref = case.slack_position
    pv, pq = [], []
    for i, bus in enumerate(case.buses):
        if i == ref:
            continue
        if bus.bus_type == BusType.PV and i in gen_buses:
            pv.append(i)
        else:
            pq.append(i)
    return ref, np.array(pv, dtype=int), np.array(pq, dtype=int)


def _check_connected(case: NetworkCase):
    ybus = case.admittance
    pattern = sparse.csr_matrix((np.ones(ybus.nnz), ybus.indices, ybus.indptr), shape=ybus.shape)
    n_islands, _ = connected_components(pattern, directed=False)
    if n_islands > 1:
        raise SingularJacobianError(f"singular Jacobian: network has {n_islands} islands")


def gen_incidence(case: NetworkCase) -> sparse.csr_matrix:
    """Bus-by-generator incidence of in-service generators."""
    ng = len(case.gens)
    rows = [case.bus_position(g.bus) for g in case.gens]
    vals = [1.0 if g.in_service else 0.0 for g in case.gens]
    return sparse.csr_matrix((vals, (rows, np.arange(ng))), shape=(case.n_bus, ng))


def ac_power_flow(case: NetworkCase, inj: Optional[Injections] = None,
                  gen_setpoints: Optional[GenSetpoints] = None,
                  tol: float = PF_TOLERANCE, max_iter: int = PF_MAX_ITER,
                  strict: bool = False) -> FlowSolution:
    """Solve the AC power flow; generator limits are ignored.

    Hitting max_iter gives status MAX_ITER, or ConvergenceError when strict.
    """
    inj = inj or Injections()
    inj.check_buses(case)
    setpoints = gen_setpoints or GenSetpoints.from_case(case)
    _check_connected(case)

    ybus = case.admittance
    base = case.base_mva
    ref, pv, pq = _bus_classes(case)
    pvpq = np.r_[pv, pq].astype(int)

    p_load, q_load = inj.net_load(case)
    cg = gen_incidence(case)
    p_gen_bus = cg @ setpoints.p
    sbus = (p_gen_bus - p_load) / base - 1j * q_load / base

    vm = np.ones(case.n_bus)
    va = np.zeros(case.n_bus)
    for k in case.active_gens():
        pos = case.bus_position(case.gens[k].bus)
        if pos == ref or pos in pv:
            vm[pos] = setpoints.v[k]
    v = vm * np.exp(1j * va)

    def mismatch(v):
        mis = v * np.conj(ybus @ v) - sbus
        return np.r_[mis[pvpq].real, mis[pq].imag]

    f = mismatch(v)
    converged = np.max(np.abs(f), initial=0.0) < tol
    it = 0
    npvpq = len(pvpq)

    while not converged and it < max_iter:
        it += 1
        ds_dva, ds_dvm = dsbus_dv(ybus, v)
        j11 = ds_dva[pvpq][:, pvpq].real
        j12 = ds_dvm[pvpq][:, pq].real
        j21 = ds_dva[pq][:, pvpq].imag
        j22 = ds_dvm[pq][:, pq].imag
        jac = sparse.vstack([sparse.hstack([j11, j12]), sparse.hstack([j21, j22])], format="csc")
        try:
            dx = -splu(jac).solve(f)
        except RuntimeError as e:
            raise SingularJacobianError(f"singular Jacobian: {e}") from e
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError("singular Jacobian: non-finite Newton step")

        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        v = vm * np.exp(1j * va)
        vm, va = np.abs(v), np.angle(v)

        f = mismatch(v)
        converged = np.max(np.abs(f), initial=0.0) < tol
        logger.debug("power flow iteration %d: max mismatch %.3e", it, np.max(np.abs(f), initial=0.0))

    s = v * np.conj(ybus @ v) * base
    status = FlowStatus.CONVERGED if converged else FlowStatus.MAX_ITER
    if not converged:
        if strict:
            raise ConvergenceError(f"power flow did not converge in {max_iter} iterations "
                                   f"(max mismatch {np.max(np.abs(f), initial=0.0):.3e})")
        logger.warning("power flow did not converge in %d iterations", max_iter)
    return FlowSolution(
        v=np.abs(v), theta=np.angle(v) - np.angle(v[ref]), p_inj=s.real, q_inj=s.imag,
        iterations=it, max_mismatch=float(np.max(np.abs(f), initial=0.0)), status=status,
    )


def branch_flows(case: NetworkCase, v, theta) -> BranchFlows:
    """Per-branch P, Q at both ends, apparent power and voltage drop."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if v.shape != (case.n_bus,) or theta.shape != (case.n_bus,):
        raise DimensionError(f"voltage vectors must have length {case.n_bus}, "
                             f"got {v.shape} and {theta.shape}")
    m = branch_matrices(case)
    vc = v * np.exp(1j * theta)
    sf = (m.cf @ vc) * np.conj(m.yf @ vc) * case.base_mva
    st = (m.ct @ vc) * np.conj(m.yt @ vc) * case.base_mva
    dv = m.cf @ v - m.ct @ v
    return BranchFlows(p_from=sf.real, q_from=sf.imag, p_to=st.real, q_to=st.imag,
                       s_from=np.abs(sf), s_to=np.abs(st), dv=dv)
