"""
Evaluating, fitting and sampling multivariate Gaussian mixtures.

Densities are computed in log space through the Cholesky factors of the
component covariances; responsibilities use log-sum-exp so that
well-separated components do not underflow.
"""
import logging
from typing import Iterable, Tuple

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.special import logsumexp

from app.errors import CholeskyError, DataError, DegenerateDataError, DimensionError, UsageError
from app.models.mixture import EmOptions, FitResult, GaussianMixture, InitMethod

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = np.log(DENSITY_FLOOR)
LOG_2PI = np.log(2 * np.pi)


def _as_points(model: GaussianMixture, x) -> Tuple[np.ndarray, bool]:
    """Coerce x to an (n, D) array; the flag tells whether a single point was given."""
    arr = np.asarray(x, dtype=float)
    d = model.dim
    if arr.ndim == 0 and d == 1:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == d:
            return arr.reshape(1, d), True
        if d == 1:
            return arr.reshape(-1, 1), False
    if arr.ndim == 2 and arr.shape[1] == d:
        return arr, False
    raise DimensionError(f"expected points of dimension {d}, got array of shape {arr.shape}")


def component_log_densities(model: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """(n, M) matrix of log c_m + log N(x_i | mu_m, Sigma_m)."""
    n, d = x.shape
    out = np.empty((n, model.n_components))
    factors = model.cholesky_factors
    for m in range(model.n_components):
        chol = factors[m]
        sol = scipy.linalg.solve_triangular(chol, (x - model.means[m]).T, lower=True)
        out[:, m] = (np.log(model.weights[m]) - np.sum(np.log(np.diag(chol)))
                     - 0.5 * d * LOG_2PI - 0.5 * np.sum(sol ** 2, axis=0))
    return out


def log_pdf(model: GaussianMixture, x):
    pts, single = _as_points(model, x)
    values = logsumexp(component_log_densities(model, pts), axis=1)
    return float(values[0]) if single else values


def pdf(model: GaussianMixture, x):
    """Mixture density at one point (float) or at each row of an (n, D) array."""
    return np.exp(log_pdf(model, x))


def log_likelihood(model: GaussianMixture, data) -> float:
    pts, _ = _as_points(model, data)
    if len(pts) == 0:
        raise DataError("log-likelihood needs at least one point")
    values = logsumexp(component_log_densities(model, pts), axis=1)
    return float(np.sum(np.maximum(values, LOG_DENSITY_FLOOR)))


# ----------------------------------------------------------
# EM
# ----------------------------------------------------------

def _floor_eigenvalues(cov: np.ndarray, eps: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    if eps <= 0:
        return cov
    w, v = np.linalg.eigh(cov)
    if w.min() >= eps:
        return cov
    cov = (v * np.maximum(w, eps)) @ v.T
    return 0.5 * (cov + cov.T)


def _kmeans_pp(data: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = len(data)
    centers = [data[rng.integers(n)]]
    dist = np.sum((data - centers[0]) ** 2, axis=1)
    for _ in range(1, m):
        total = dist.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=dist / total)
        centers.append(data[idx])
        dist = np.minimum(dist, np.sum((data - data[idx]) ** 2, axis=1))
    return np.array(centers)


def _initial_model(data, m, opts: EmOptions, rng) -> GaussianMixture:
    n, d = data.shape
    if opts.init == InitMethod.KMEANS_PP:
        means = _kmeans_pp(data, m, rng)
    else:
        means = data[rng.choice(n, size=m, replace=False)]
    pooled = np.atleast_2d(np.cov(data.T, bias=True)) if n > 1 else np.zeros((d, d))
    pooled = _floor_eigenvalues(pooled, opts.reg_eps)
    return GaussianMixture(np.full(m, 1.0 / m), means, np.repeat(pooled[None], m, axis=0))


def _m_step(data, log_resp, opts: EmOptions) -> GaussianMixture:
    n, d = data.shape
    resp = np.exp(log_resp)
    nk = resp.sum(axis=0)
    means = np.empty((len(nk), d))
    covs = np.empty((len(nk), d, d))
    for k, weight in enumerate(nk):
        if weight <= 1e-10 * n:
            # collapsed component: restart it at the worst-explained point
            worst = int(np.argmin(logsumexp(log_resp, axis=1)))
            logger.warning("EM component %d collapsed; re-seeding at data point %d", k + 1, worst)
            nk[k] = 1.0
            means[k] = data[worst]
            pooled = np.atleast_2d(np.cov(data.T, bias=True)) if n > 1 else np.zeros((d, d))
            covs[k] = _floor_eigenvalues(pooled, opts.reg_eps)
            continue
        means[k] = resp[:, k] @ data / weight
        diff = data - means[k]
        covs[k] = _floor_eigenvalues((resp[:, k, None] * diff).T @ diff / weight, opts.reg_eps)
    return GaussianMixture(nk / nk.sum(), means, covs)


def _run_em(data, m, opts: EmOptions, rng) -> FitResult:
    model = _initial_model(data, m, opts, rng)
    trace = []
    converged = False
    iterations = 0
    try:
        log_dens = component_log_densities(model, data)
        log_norm = logsumexp(log_dens, axis=1)
        trace.append(float(log_norm.sum()))
        for iterations in range(1, opts.max_iter + 1):
            model = _m_step(data, log_dens - log_norm[:, None], opts)
            log_dens = component_log_densities(model, data)
            log_norm = logsumexp(log_dens, axis=1)
            trace.append(float(log_norm.sum()))
            logger.debug("EM iteration %d: log-likelihood %.10g", iterations, trace[-1])
            if abs(trace[-1] - trace[-2]) < opts.rel_tol * abs(trace[-2]):
                converged = True
                break
    except CholeskyError as e:
        raise DegenerateDataError(f"degenerate covariance during EM: {e}") from e
    return FitResult(model=model, trace=trace, iterations=iterations, converged=converged)


def _check_data(data, m: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"data must be an n x D matrix, got shape {arr.shape}")
    if m < 1:
        raise UsageError(f"component count must be at least 1, got {m}")
    if len(arr) < m:
        raise UsageError(f"need at least M={m} points to fit, got {len(arr)}")
    if not np.all(np.isfinite(arr)):
        raise DataError("data contains non-finite values")
    return arr


def fit_em(data, m: int, opts: EmOptions = None) -> FitResult:
    """Fit an M-component mixture by EM; the best of `opts.restarts` runs is kept."""
    opts = opts or EmOptions()
    arr = _check_data(data, m)
    if opts.reg_eps == 0 and m > 1 and np.all(np.ptp(arr, axis=0) == 0):
        raise DegenerateDataError("all data points are identical; covariance would be singular")

    best = None
    for i, child in enumerate(np.random.SeedSequence(opts.seed).spawn(opts.restarts)):
        rng = np.random.Generator(np.random.Philox(child))
        result = _run_em(arr, m, opts, rng)
        logger.debug("EM restart %d: log-likelihood %.10g after %d iterations",
                     i + 1, result.log_likelihood, result.iterations)
        if best is None or result.log_likelihood > best.log_likelihood:
            best = result

    logger.info("EM fit M=%d on %d points: log-likelihood %.10g (%d iterations, converged=%s)",
                m, len(arr), best.log_likelihood, best.iterations, best.converged)
    return best


def n_parameters(m: int, d: int) -> int:
    return (m - 1) + m * d + m * d * (d + 1) // 2


def select_components(data, m_range: Iterable[int] = range(1, 11), opts: EmOptions = None):
    """BIC sweep: returns (best M, DataFrame with M, log_likelihood, bic)."""
    opts = opts or EmOptions()
    arr = _check_data(data, 1)
    rows = []
    for m in m_range:
        if m > len(arr):
            break
        result = fit_em(arr, m, opts)
        ll = result.log_likelihood
        rows.append({"M": m, "log_likelihood": ll,
                     "bic": -2 * ll + n_parameters(m, arr.shape[1]) * np.log(len(arr))})
    table = pd.DataFrame(rows, columns=["M", "log_likelihood", "bic"])
    if table.empty:
        raise UsageError("no component count in range could be fitted")
    best = int(table.loc[table["bic"].idxmin(), "M"])
    return best, table


def sample_direct(model: GaussianMixture, n: int, seed: int) -> np.ndarray:
    """Ancestral sampling: categorical component draw, then a Gaussian draw."""
    if n < 0:
        raise UsageError(f"sample count must be non-negative, got {n}")
    if n == 0:
        return np.empty((0, model.dim))
    rng = np.random.Generator(np.random.Philox(seed))
    comps = rng.choice(model.n_components, size=n, p=model.weights)
    z = rng.standard_normal((n, model.dim))
    factors = model.cholesky_factors
    return model.means[comps] + np.einsum("nij,nj->ni", factors[comps], z)
