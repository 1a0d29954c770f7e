"""
Deterministic optimal power flow.

solve_acopf poses the polar AC-OPF over x = [Va, Vm, Pg, Qg] (per unit,
in-service generators only) and hands it to the interior-point solver;
solve_dcopf does the same for the lossless linearisation over x = [Va, Pg].
Wind enters as negative load. Infeasibility is reported through the
solution status, never raised.
"""
import logging

import numpy as np
from scipy import sparse

from app.models.network import NetworkCase
from app.models.opf import Injections, KktResiduals, OpfSolution, SolveStatus
from app.services import interior_point
from app.services.admittance import branch_matrices, build_dc_matrices
from app.services.derivatives import d2asbr_dv2, d2sbus_dv2, dabr_dv, dsbr_dv, dsbus_dv
from app.services.interior_point import NlpProblem
from app.services.power_flow import branch_flows

logger = logging.getLogger(__name__)

BALANCE_TOL = 1e-9   # MW


def _midpoint(lo, hi):
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    mid = np.where(np.isfinite(lo) & np.isfinite(hi), (lo + hi) / 2, 0.0)
    mid = np.where(np.isfinite(lo) & ~np.isfinite(hi), lo, mid)
    return np.where(~np.isfinite(lo) & np.isfinite(hi), hi, mid)


def _active_gen_data(case: NetworkCase):
    on = case.active_gens()
    gens = [case.gens[k] for k in on]
    rows = [case.bus_position(g.bus) for g in gens]
    cg = sparse.csr_matrix((np.ones(len(on)), (rows, np.arange(len(on)))), shape=(case.n_bus, len(on)))
    cost = np.array([[g.cost.a, g.cost.b, g.cost.c] for g in gens], dtype=float).reshape(-1, 3)
    return on, gens, cg, cost


def _balance_precheck(case: NetworkCase, p_load, gens, dc: bool):
    """Certifies infeasibility when total capacity cannot meet total demand."""
    demand = float(np.sum(p_load))
    p_max = sum(g.p_max for g in gens)
    if p_max < demand - BALANCE_TOL:
        return f"net load {demand:.6g} MW exceeds total generation capacity {p_max:.6g} MW"
    if dc:
        p_min = sum(g.p_min for g in gens)
        if p_min > demand + BALANCE_TOL:
            return f"minimum generation {p_min:.6g} MW exceeds net load {demand:.6g} MW"
    return None


def _infeasible(case: NetworkCase, solver: str, message: str) -> OpfSolution:
    nb, ng, nl = case.n_bus, len(case.gens), len(case.branches)
    logger.debug("%s-OPF infeasible: %s", solver.upper(), message)
    return OpfSolution(cost=np.nan, v=np.full(nb, np.nan), theta=np.full(nb, np.nan),
                       p_gen=np.full(ng, np.nan), q_gen=np.full(ng, np.nan),
                       branch_p=np.full(nl, np.nan), branch_s=np.full(nl, np.nan),
                       status=SolveStatus.INFEASIBLE, iterations=0, kkt=KktResiduals(),
                       solver=solver, message=message)


def _quadratic_cost(cost, base, offset, n):
    """Objective callback for a polynomial cost in Pg (MW) over x[offset:offset+ng]."""
    a, b, c = cost[:, 0], cost[:, 1], cost[:, 2]
    ng = len(a)
    d2 = np.zeros(n)
    d2[offset:offset + ng] = 2 * c * base * base
    hess = sparse.diags(d2, 0, shape=(n, n), format="csr")

    def objective(x):
        pg = x[offset:offset + ng] * base
        f = float(np.sum(a + b * pg + c * pg * pg))
        df = np.zeros(n)
        df[offset:offset + ng] = base * (b + 2 * c * pg)
        return f, df, hess
    return objective


def _dispatch_cost(case: NetworkCase, p_gen, inj: Injections) -> float:
    total = sum(case.gens[k].cost.evaluate(p_gen[k]) for k in case.active_gens())
    return float(total + inj.fixed_cost)


# ------------------------------------------------------
# AC-OPF
# ------------------------------------------------------

class _AcProblem:
    """Power-balance equalities, branch-limit inequalities and their Hessian."""

    def __init__(self, case: NetworkCase, cg, sd):
        self.nb = case.n_bus
        self.ng = cg.shape[1]
        self.ybus = case.admittance
        self.cg = cg
        self.sd = sd

        m = branch_matrices(case)
        base = case.base_mva
        self.limits = []   # (Yb, Cb, limit p.u., real_only) per enforced branch end
        s_idx = [i for i in case.active_branches() if np.isfinite(case.branches[i].s_max)]
        p_idx = [i for i in case.active_branches() if np.isfinite(case.branches[i].p_max)]
        for idx, attr, real_only in ((s_idx, "s_max", False), (p_idx, "p_max", True)):
            if not idx:
                continue
            lim = np.array([getattr(case.branches[i], attr) for i in idx]) / base
            for ybr, cbr in ((m.yf, m.cf), (m.yt, m.ct)):
                self.limits.append((ybr[idx], cbr[idx], lim, real_only))

    def split(self, x):
        nb, ng = self.nb, self.ng
        va, vm = x[:nb], x[nb:2 * nb]
        pg, qg = x[2 * nb:2 * nb + ng], x[2 * nb + ng:]
        return vm * np.exp(1j * va), pg, qg

    def equalities(self, x):
        v, pg, qg = self.split(x)
        mis = v * np.conj(self.ybus @ v) - self.cg @ (pg + 1j * qg) + self.sd
        ds_dva, ds_dvm = dsbus_dv(self.ybus, v)
        zero = sparse.csr_matrix((self.nb, self.ng))
        jac = sparse.bmat([
            [ds_dva.real, ds_dvm.real, -self.cg, zero],
            [ds_dva.imag, ds_dvm.imag, zero, -self.cg],
        ], format="csr")
        return np.r_[mis.real, mis.imag], jac.T.tocsr()

    def _flow_terms(self, v, ybr, cbr, real_only):
        ds_dva, ds_dvm, s = dsbr_dv(ybr, cbr, v)
        if real_only:
            ds_dva, ds_dvm, s = sparse.csr_matrix(ds_dva.real), sparse.csr_matrix(ds_dvm.real), s.real
        return ds_dva, ds_dvm, s

    def inequalities(self, x):
        v, _, _ = self.split(x)
        n = len(x)
        if not self.limits:
            return np.zeros(0), sparse.csr_matrix((n, 0))
        values, rows = [], []
        for ybr, cbr, lim, real_only in self.limits:
            ds_dva, ds_dvm, s = self._flow_terms(v, ybr, cbr, real_only)
            da_dva, da_dvm = dabr_dv(ds_dva, ds_dvm, s)
            values.append(np.abs(s) ** 2 - lim ** 2)
            rows.append(sparse.hstack([da_dva, da_dvm, sparse.csr_matrix((len(lim), 2 * self.ng))]))
        return np.concatenate(values), sparse.vstack(rows, format="csr").T.tocsr()

    def hessian(self, x, lam, mu):
        v, _, _ = self.split(x)
        nb = self.nb
        lam_p, lam_q = lam[:nb], lam[nb:2 * nb]
        paa, pav, pva, pvv = d2sbus_dv2(self.ybus, v, lam_p)
        qaa, qav, qva, qvv = d2sbus_dv2(self.ybus, v, lam_q)
        haa = paa.real + qaa.imag
        hav = pav.real + qav.imag
        hva = pva.real + qva.imag
        hvv = pvv.real + qvv.imag

        offset = 0
        for ybr, cbr, lim, real_only in self.limits:
            mu_end = mu[offset:offset + len(lim)]
            offset += len(lim)
            ds_dva, ds_dvm, s = self._flow_terms(v, ybr, cbr, real_only)
            faa, fav, fva, fvv = d2asbr_dv2(ds_dva, ds_dvm, s, cbr, ybr, v, mu_end)
            haa, hav, hva, hvv = haa + faa, hav + fav, hva + fva, hvv + fvv

        voltage_block = sparse.bmat([[haa, hav], [hva, hvv]], format="csr")
        if not self.ng:
            return voltage_block
        return sparse.block_diag([voltage_block, sparse.csr_matrix((2 * self.ng, 2 * self.ng))],
                                 format="csr")


def _dv_constraints(case: NetworkCase, n):
    """Linear |V_c - V_d| <= dv_max rows over the Vm block."""
    nb = case.n_bus
    idx = [i for i in case.active_branches() if np.isfinite(case.branches[i].dv_max)]
    if not idx:
        return None, None
    m = branch_matrices(case)
    diff = (m.cf - m.ct)[idx]
    lim = np.array([case.branches[i].dv_max for i in idx])
    pad_left = sparse.csr_matrix((len(idx), nb))
    pad_right = sparse.csr_matrix((len(idx), n - 2 * nb))
    block = sparse.hstack([pad_left, diff, pad_right], format="csr")
    return sparse.vstack([block, -block], format="csr"), np.r_[lim, lim]


def solve_acopf(case: NetworkCase, inj: Injections = None) -> OpfSolution:
    inj = inj or Injections()
    inj.check_buses(case)
    base = case.base_mva
    nb = case.n_bus
    on, gens, cg, cost = _active_gen_data(case)
    ng = len(on)

    p_load, q_load = inj.net_load(case)
    reason = _balance_precheck(case, p_load, gens, dc=False)
    if reason:
        return _infeasible(case, "ac", reason)

    problem = _AcProblem(case, cg, (p_load + 1j * q_load) / base)
    n = 2 * nb + 2 * ng
    ref = case.slack_position

    v_min = np.array([b.v_min for b in case.buses])
    v_max = np.array([b.v_max for b in case.buses])
    pg_min = np.array([g.p_min for g in gens]) / base
    pg_max = np.array([g.p_max for g in gens]) / base
    qg_min = np.array([g.q_min for g in gens]) / base
    qg_max = np.array([g.q_max for g in gens]) / base

    va_min = np.full(nb, -np.inf)
    va_max = np.full(nb, np.inf)
    va_min[ref] = va_max[ref] = 0.0
    xmin = np.r_[va_min, v_min, pg_min, qg_min]
    xmax = np.r_[va_max, v_max, pg_max, qg_max]
    x0 = np.r_[np.zeros(nb), np.clip(np.ones(nb), v_min, v_max),
               _midpoint(pg_min, pg_max), _midpoint(qg_min, qg_max)]

    a_in, b_in = _dv_constraints(case, n)
    nlp = NlpProblem(
        x0=x0, objective=_quadratic_cost(cost, base, 2 * nb, n),
        equalities=problem.equalities, inequalities=problem.inequalities, hessian=problem.hessian,
        a_in=a_in, b_in=b_in, xmin=xmin, xmax=xmax,
    )
    result = interior_point.solve(nlp)
    logger.debug("AC-OPF finished: %s after %d iterations (%s)", result.status.value,
                 result.iterations, result.message)
    if result.status == SolveStatus.INFEASIBLE:
        return _infeasible(case, "ac", result.message)

    v, pg, qg = problem.split(result.x)
    vm = np.abs(v)
    theta = np.angle(v) - np.angle(v[ref])
    p_gen = np.zeros(len(case.gens))
    q_gen = np.zeros(len(case.gens))
    p_gen[on] = pg * base
    q_gen[on] = qg * base
    flows = branch_flows(case, vm, theta)
    return OpfSolution(
        cost=_dispatch_cost(case, p_gen, inj), v=vm, theta=theta, p_gen=p_gen, q_gen=q_gen,
        branch_p=flows.p_cd, branch_s=flows.s_cd, status=result.status,
        iterations=result.iterations, kkt=result.kkt, solver="ac", message=result.message,
    )


# ------------------------------------------------------
# DC-OPF
# ------------------------------------------------------

def solve_dcopf(case: NetworkCase, inj: Injections = None) -> OpfSolution:
    inj = inj or Injections()
    inj.check_buses(case)
    base = case.base_mva
    nb = case.n_bus
    on, gens, cg, cost = _active_gen_data(case)
    ng = len(on)

    p_load, _ = inj.net_load(case)
    reason = _balance_precheck(case, p_load, gens, dc=True)
    if reason:
        return _infeasible(case, "dc", reason)

    bbus, bf = build_dc_matrices(case)
    gs = np.array([b.gs for b in case.buses])
    n = nb + ng
    ref = case.slack_position

    a_eq = sparse.hstack([bbus, -cg], format="csr")
    b_eq = -(p_load + gs) / base

    idx = [i for i in case.active_branches()
           if np.isfinite(min(case.branches[i].s_max, case.branches[i].p_max))]
    a_in = b_in = None
    if idx:
        lim = np.array([min(case.branches[i].s_max, case.branches[i].p_max) for i in idx]) / base
        rows = sparse.hstack([bf[idx], sparse.csr_matrix((len(idx), ng))], format="csr")
        a_in = sparse.vstack([rows, -rows], format="csr")
        b_in = np.r_[lim, lim]

    pg_min = np.array([g.p_min for g in gens]) / base
    pg_max = np.array([g.p_max for g in gens]) / base
    va_min = np.full(nb, -np.inf)
    va_max = np.full(nb, np.inf)
    va_min[ref] = va_max[ref] = 0.0

    nlp = NlpProblem(
        x0=np.r_[np.zeros(nb), _midpoint(pg_min, pg_max)],
        objective=_quadratic_cost(cost, base, nb, n),
        a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in,
        xmin=np.r_[va_min, pg_min], xmax=np.r_[va_max, pg_max],
    )
    result = interior_point.solve(nlp)
    logger.debug("DC-OPF finished: %s after %d iterations (%s)", result.status.value,
                 result.iterations, result.message)
    if result.status == SolveStatus.INFEASIBLE:
        return _infeasible(case, "dc", result.message)

    theta = result.x[:nb] - result.x[ref]
    p_gen = np.zeros(len(case.gens))
    p_gen[on] = result.x[nb:] * base
    branch_p = (bf @ theta) * base
    return OpfSolution(
        cost=_dispatch_cost(case, p_gen, inj), v=np.ones(nb), theta=theta, p_gen=p_gen,
        q_gen=np.zeros(len(case.gens)), branch_p=branch_p, branch_s=np.abs(branch_p),
        status=result.status, iterations=result.iterations, kkt=result.kkt, solver="dc",
        message=result.message,
    )


def solve_opf(case: NetworkCase, inj: Injections = None, solver: str = "ac") -> OpfSolution:
    if solver == "dc":
        return solve_dcopf(case, inj)
    return solve_acopf(case, inj)
