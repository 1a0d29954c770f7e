"""
Bus and branch admittance matrices (pi branch model, fixed taps, bus shunts).
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class BranchMatrices:
    yf: sparse.csr_matrix   # from-end currents: If = Yf V
    yt: sparse.csr_matrix   # to-end currents:   It = Yt V
    cf: sparse.csr_matrix   # branch-from-bus incidence
    ct: sparse.csr_matrix   # branch-to-bus incidence


def _branch_terms(case):
    nl = len(case.branches)
    stat = np.array([1.0 if br.in_service else 0.0 for br in case.branches])
    r = np.array([br.r for br in case.branches], dtype=float)
    x = np.array([br.x for br in case.branches], dtype=float)
    b = np.array([br.b_charging for br in case.branches], dtype=float)
    tap = np.array([br.tap if br.tap else 1.0 for br in case.branches], dtype=complex)

    with np.errstate(divide="ignore", invalid="ignore"):
        ys = stat / (r + 1j * x) if nl else np.zeros(0, dtype=complex)
    ytt = ys + 1j * stat * b / 2.0
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap
    return yff, yft, ytf, ytt


def branch_matrices(case) -> BranchMatrices:
    nb, nl = case.n_bus, len(case.branches)
    f = np.array([case.bus_position(br.from_bus) for br in case.branches], dtype=int)
    t = np.array([case.bus_position(br.to_bus) for br in case.branches], dtype=int)
    yff, yft, ytf, ytt = _branch_terms(case)

    rows = np.r_[np.arange(nl), np.arange(nl)]
    yf = sparse.csr_matrix((np.r_[yff, yft], (rows, np.r_[f, t])), shape=(nl, nb))
    yt = sparse.csr_matrix((np.r_[ytf, ytt], (rows, np.r_[f, t])), shape=(nl, nb))
    cf = sparse.csr_matrix((np.ones(nl), (np.arange(nl), f)), shape=(nl, nb))
    ct = sparse.csr_matrix((np.ones(nl), (np.arange(nl), t)), shape=(nl, nb))
    return BranchMatrices(yf, yt, cf, ct)


def build_admittance(case) -> sparse.csr_matrix:
    """Y = G + jB in per unit on the case base."""
    nb = case.n_bus
    m = branch_matrices(case)
    ysh = np.array([(bus.gs + 1j * bus.bs) for bus in case.buses], dtype=complex) / case.base_mva
    ybus = m.cf.T @ m.yf + m.ct.T @ m.yt + sparse.diags(ysh, 0, shape=(nb, nb))
    ybus = sparse.csr_matrix(ybus)
    ybus.eliminate_zeros()
    ybus.sort_indices()
    return ybus


def build_dc_matrices(case):
    """B matrices of the lossless linearised network.

    Returns (Bbus, Bf) with Bbus theta = P injection and Bf theta = P_from,
    both per unit.
    """
    nb, nl = case.n_bus, len(case.branches)
    stat = np.array([1.0 if br.in_service else 0.0 for br in case.branches])
    x = np.array([br.x for br in case.branches], dtype=float)
    tap = np.array([br.tap if br.tap else 1.0 for br in case.branches], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = stat / (x * tap) if nl else np.zeros(0)
    f = np.array([case.bus_position(br.from_bus) for br in case.branches], dtype=int)
    t = np.array([case.bus_position(br.to_bus) for br in case.branches], dtype=int)

    rows = np.r_[np.arange(nl), np.arange(nl)]
    cft = sparse.csr_matrix((np.r_[np.ones(nl), -np.ones(nl)], (rows, np.r_[f, t])), shape=(nl, nb))
    bf = sparse.csr_matrix((np.r_[b, -b], (rows, np.r_[f, t])), shape=(nl, nb))
    bbus = sparse.csr_matrix(cft.T @ bf)
    return bbus, bf
