"""
First and second derivatives of bus injections and branch flows with
respect to polar voltage coordinates (angle Va, magnitude Vm).

Second-derivative helpers return the four blocks (aa, av, va, vv) of
d/dx (dS/dx^T lam), with x = [Va, Vm].
"""
import numpy as np
from scipy import sparse


def _diag(values) -> sparse.csr_matrix:
    return sparse.diags(values, 0, format="csr")


def dsbus_dv(ybus, v):
    """(dS_dVa, dS_dVm) of S = V .* conj(Ybus V)."""
    ibus = ybus @ v
    diag_v = _diag(v)
    diag_ibus = _diag(ibus)
    diag_vnorm = _diag(v / np.abs(v))
    ds_dvm = diag_v @ (ybus @ diag_vnorm).conj() + diag_ibus.conj() @ diag_vnorm
    ds_dva = 1j * diag_v @ (diag_ibus - ybus @ diag_v).conj()
    return sparse.csr_matrix(ds_dva), sparse.csr_matrix(ds_dvm)


def d2sbus_dv2(ybus, v, lam):
    n = len(v)
    ibus = ybus @ v
    diag_lam = _diag(lam)
    diag_v = _diag(v)

    a = _diag(lam * v)
    b = ybus @ diag_v
    c = a @ b.conj()
    d = ybus.conj().T @ diag_v
    e = diag_v.conj() @ (d @ diag_lam - _diag(d @ lam))
    f = c - a @ _diag(ibus.conj())
    g = _diag(np.ones(n) / np.abs(v))

    gaa = e + f
    gva = 1j * g @ (e - f)
    gav = gva.T
    gvv = g @ (c + c.T) @ g
    return gaa, gav, gva, gvv


def dsbr_dv(ybr, cbr, v):
    """(dS_dVa, dS_dVm, S) of the flows at one branch end: S = (Cbr V) .* conj(Ybr V)."""
    i = ybr @ v
    vb = cbr @ v
    diag_v = _diag(v)
    diag_vnorm = _diag(v / np.abs(v))
    diag_i = _diag(i)
    diag_vb = _diag(vb)

    ds_dva = 1j * (diag_i.conj() @ cbr @ diag_v - diag_vb @ (ybr @ diag_v).conj())
    ds_dvm = diag_vb @ (ybr @ diag_vnorm).conj() + diag_i.conj() @ cbr @ diag_vnorm
    s = vb * np.conj(i)
    return sparse.csr_matrix(ds_dva), sparse.csr_matrix(ds_dvm), s


def dabr_dv(ds_dva, ds_dvm, s):
    """Derivatives of the squared apparent flow |S|^2."""
    da_dp = _diag(2 * s.real)
    da_dq = _diag(2 * s.imag)
    da_dva = da_dp @ ds_dva.real + da_dq @ ds_dva.imag
    da_dvm = da_dp @ ds_dvm.real + da_dq @ ds_dvm.imag
    return sparse.csr_matrix(da_dva), sparse.csr_matrix(da_dvm)


def d2sbr_dv2(cbr, ybr, v, lam):
    diag_lam = _diag(lam)
    diag_v = _diag(v)

    a = ybr.conj().T @ diag_lam @ cbr
    b = diag_v.conj() @ a @ diag_v
    d = _diag((a @ v) * np.conj(v))
    e = _diag((a.T @ np.conj(v)) * v)
    f = b + b.T
    g = _diag(1.0 / np.abs(v))

    haa = f - d - e
    hva = 1j * g @ (b - b.T - d + e)
    hav = hva.T
    hvv = g @ f @ g
    return haa, hav, hva, hvv


def d2asbr_dv2(ds_dva, ds_dvm, s, cbr, ybr, v, lam):
    """Second derivatives of lam' |S|^2 for one branch end."""
    diag_lam = _diag(lam)
    saa, sav, sva, svv = d2sbr_dv2(cbr, ybr, v, np.conj(s) * lam)

    haa = 2 * (saa + ds_dva.T @ diag_lam @ ds_dva.conj()).real
    hva = 2 * (sva + ds_dvm.T @ diag_lam @ ds_dva.conj()).real
    hav = 2 * (sav + ds_dva.T @ diag_lam @ ds_dvm.conj()).real
    hvv = 2 * (svv + ds_dvm.T @ diag_lam @ ds_dvm.conj()).real
    return haa, hav, hva, hvv
