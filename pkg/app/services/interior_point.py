"""
Primal-dual interior-point solver for smooth nonlinear programs

    min f(x)  s.t.  g(x) = 0,  h(x) <= 0,
                    A_eq x = b_eq,  A_in x <= b_in,  xmin <= x <= xmax

Inequalities get slacks z > 0 with a logarithmic barrier; each iteration
takes one Newton step on the reduced KKT system (sparse LU), applies the
fraction-to-boundary rule to primal and dual steps separately and shrinks
the barrier parameter by a fixed factor of the average complementarity.
Both the AC and the DC OPF are posed in this form.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from app.models.opf import KktResiduals, SolveStatus

logger = logging.getLogger(__name__)

FRACTION_TO_BOUNDARY = 0.995
BARRIER_REDUCTION = 0.2
MAX_ITERATIONS = 150
FEASIBILITY_TOL = 1e-6
STATIONARITY_TOL = 1e-6
COMPLEMENTARITY_TOL = 1e-6
COST_TOL = 1e-6
STEP_FLOOR = 1e-12
DIVERGENCE_LIMIT = 1e10
INITIAL_SLACK = 1.0

Vector = np.ndarray
SparseCallback = Callable[[Vector], Tuple[Vector, sparse.spmatrix]]


def _empty_constraints(n):
    def fcn(x):
        return np.zeros(0), sparse.csr_matrix((n, 0))
    return fcn


@dataclass
class NlpProblem:
    """Callbacks follow the convention dg, dh are (n x m) Jacobian transposes."""
    x0: Vector
    objective: Callable[[Vector], Tuple[float, Vector, sparse.spmatrix]]
    equalities: Optional[SparseCallback] = None
    inequalities: Optional[SparseCallback] = None
    hessian: Optional[Callable[[Vector, Vector, Vector], sparse.spmatrix]] = None   # of lam'g + mu'h
    a_eq: Optional[sparse.spmatrix] = None
    b_eq: Optional[Vector] = None
    a_in: Optional[sparse.spmatrix] = None
    b_in: Optional[Vector] = None
    xmin: Optional[Vector] = None
    xmax: Optional[Vector] = None


@dataclass
class IpmResult:
    x: Vector
    f: float
    status: SolveStatus
    iterations: int
    lam: Vector = field(repr=False, default=None)
    mu: Vector = field(repr=False, default=None)
    kkt: KktResiduals = field(default_factory=KktResiduals)
    message: str = ""


class _Assembled:
    """Merges nonlinear, linear and bound constraints into g(x) = 0, h(x) <= 0."""

    def __init__(self, p: NlpProblem):
        n = len(p.x0)
        self.n = n
        self.p = p
        self.g_nl = p.equalities or _empty_constraints(n)
        self.h_nl = p.inequalities or _empty_constraints(n)

        xmin = np.full(n, -np.inf) if p.xmin is None else np.asarray(p.xmin, dtype=float)
        xmax = np.full(n, np.inf) if p.xmax is None else np.asarray(p.xmax, dtype=float)
        fixed = np.flatnonzero(xmin == xmax)
        upper = np.flatnonzero(np.isfinite(xmax) & (xmin != xmax))
        lower = np.flatnonzero(np.isfinite(xmin) & (xmin != xmax))
        eye = sparse.identity(n, format="csr")

        eq_blocks, eq_rhs = [], []
        if p.a_eq is not None and p.a_eq.shape[0]:
            eq_blocks.append(sparse.csr_matrix(p.a_eq))
            eq_rhs.append(np.asarray(p.b_eq, dtype=float))
        if len(fixed):
            eq_blocks.append(eye[fixed])
            eq_rhs.append(xmin[fixed])
        in_blocks, in_rhs = [], []
        if p.a_in is not None and p.a_in.shape[0]:
            in_blocks.append(sparse.csr_matrix(p.a_in))
            in_rhs.append(np.asarray(p.b_in, dtype=float))
        if len(upper):
            in_blocks.append(eye[upper])
            in_rhs.append(xmax[upper])
        if len(lower):
            in_blocks.append(-eye[lower])
            in_rhs.append(-xmin[lower])

        self.a_eq = sparse.vstack(eq_blocks, format="csr") if eq_blocks else sparse.csr_matrix((0, n))
        self.b_eq = np.concatenate(eq_rhs) if eq_rhs else np.zeros(0)
        self.a_in = sparse.vstack(in_blocks, format="csr") if in_blocks else sparse.csr_matrix((0, n))
        self.b_in = np.concatenate(in_rhs) if in_rhs else np.zeros(0)

    def constraints(self, x):
        gn, dgn = self.g_nl(x)
        hn, dhn = self.h_nl(x)
        g = np.r_[gn, self.a_eq @ x - self.b_eq]
        h = np.r_[hn, self.a_in @ x - self.b_in]
        dg = _column_stack([dgn, self.a_eq.T], self.n)
        dh = _column_stack([dhn, self.a_in.T], self.n)
        self.n_g_nl, self.n_h_nl = len(gn), len(hn)
        return g, dg, h, dh

    def lagrangian_hessian(self, x, d2f, lam, mu):
        if self.p.hessian is None:
            return sparse.csr_matrix(d2f)
        return sparse.csr_matrix(d2f + self.p.hessian(x, lam[:self.n_g_nl], mu[:self.n_h_nl]))


def _column_stack(blocks, n):
    blocks = [b for b in blocks if b.shape[1]]
    if not blocks:
        return sparse.csr_matrix((n, 0))
    return sparse.hstack(blocks, format="csr")


def _step_length(v, dv):
    k = dv < 0
    if not np.any(k):
        return 1.0
    return min(FRACTION_TO_BOUNDARY * float(np.min(-v[k] / dv[k])), 1.0)


def _inf_norm(v):
    return float(np.max(np.abs(v), initial=0.0))


def solve(problem: NlpProblem, max_iter: int = MAX_ITERATIONS) -> IpmResult:
    asm = _Assembled(problem)
    x = np.array(problem.x0, dtype=float)
    n = asm.n

    f, df, d2f = problem.objective(x)
    g, dg, h, dh = asm.constraints(x)
    neq, niq = len(g), len(h)

    gamma = 1.0
    lam = np.zeros(neq)
    z = np.full(niq, INITIAL_SLACK)
    k = h < -INITIAL_SLACK
    z[k] = -h[k]
    mu = gamma / z

    def residuals(x, f, df, g, dg, h, dh, lam, mu, z, f_prev):
        lx = df + dg @ lam + dh @ mu
        max_h = float(np.max(h, initial=0.0))
        feas = max(_inf_norm(g), max_h) / (1 + max(_inf_norm(x), _inf_norm(z)))
        grad = _inf_norm(lx) / (1 + max(_inf_norm(lam), _inf_norm(mu)))
        comp = float(z @ mu) / (1 + _inf_norm(x)) if niq else 0.0
        cost = abs(f - f_prev) / (1 + abs(f_prev))
        return lx, KktResiduals(feas, grad, comp), cost

    lx, kkt, _ = residuals(x, f, df, g, dg, h, dh, lam, mu, z, f)
    status, message = SolveStatus.MAX_ITER, "iteration limit reached"

    it = 0
    while it < max_iter:
        it += 1
        lxx = asm.lagrangian_hessian(x, d2f, lam, mu)
        zinv = 1.0 / z
        dh_zinv = dh @ sparse.diags(zinv, 0, shape=(niq, niq))
        m_mat = lxx + dh_zinv @ sparse.diags(mu, 0, shape=(niq, niq)) @ dh.T
        n_vec = lx + dh_zinv @ (mu * h + gamma)

        if neq:
            kkt_mat = sparse.bmat([[m_mat, dg], [dg.T, None]], format="csc")
        else:
            kkt_mat = sparse.csc_matrix(m_mat)
        rhs = np.r_[-n_vec, -g]
        try:
            step = splu(kkt_mat).solve(rhs)
        except RuntimeError:
            try:
                reg = sparse.diags(np.r_[np.full(n, 1e-10), np.full(neq, -1e-10)])
                step = splu(sparse.csc_matrix(kkt_mat + reg)).solve(rhs)
            except RuntimeError:
                status, message = SolveStatus.MAX_ITER, "singular KKT system"
                break
        if not np.all(np.isfinite(step)):
            status, message = SolveStatus.INFEASIBLE, "non-finite Newton step"
            break

        dx, dlam = step[:n], step[n:]
        dz = -h - z - dh.T @ dx
        dmu = -mu + zinv * (gamma - mu * dz)

        alpha_p = _step_length(z, dz)
        alpha_d = _step_length(mu, dmu)

        x = x + alpha_p * dx
        z = z + alpha_p * dz
        lam = lam + alpha_d * dlam
        mu = mu + alpha_d * dmu
        if niq:
            gamma = BARRIER_REDUCTION * float(z @ mu) / niq

        f_prev = f
        f, df, d2f = problem.objective(x)
        g, dg, h, dh = asm.constraints(x)
        lx, kkt, cost_cond = residuals(x, f, df, g, dg, h, dh, lam, mu, z, f_prev)
        logger.debug("ipm %3d: f=%.8g feas=%.2e grad=%.2e comp=%.2e", it, f,
                     kkt.feasibility, kkt.stationarity, kkt.complementarity)

        if (kkt.feasibility < FEASIBILITY_TOL and kkt.stationarity < STATIONARITY_TOL
                and kkt.complementarity < COMPLEMENTARITY_TOL and cost_cond < COST_TOL):
            status, message = SolveStatus.OPTIMAL, "converged"
            break
        if (not np.all(np.isfinite(x)) or _inf_norm(x) > DIVERGENCE_LIMIT
                or max(_inf_norm(lam), _inf_norm(mu)) > DIVERGENCE_LIMIT ** 2):
            status, message = SolveStatus.INFEASIBLE, "barrier iterates diverged"
            break
        if alpha_p * _inf_norm(dx) < STEP_FLOOR and alpha_d < STEP_FLOOR:
            status, message = SolveStatus.MAX_ITER, "step size below floor"
            break

    return IpmResult(x=x, f=float(f), status=status, iterations=it, lam=lam, mu=mu,
                     kkt=kkt, message=message)
