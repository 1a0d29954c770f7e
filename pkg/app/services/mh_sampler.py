"""
Random-walk Metropolis-Hastings driven by a UniformStream.

Every step consumes exactly one (D+1)-dimensional stream point: the first
D coordinates become the Gaussian increment through the inverse normal
CDF, the last one is the acceptance uniform. Proposals outside the support
box have zero density and are rejected.
"""
import logging
from typing import Callable, Tuple

import numpy as np
from scipy.special import ndtri

from app.errors import NumericalError, UsageError, ZeroDensityError
from app.models.mixture import GaussianMixture
from app.models.sampling import ChainDiagnostics, ChainState, MhConfig, StreamKind

logger = logging.getLogger(__name__)

ZERO_UNIFORM = 2.0 ** -33     # stand-in for an exact 0 before the inverse CDF
TUNE_WINDOW = 100
TUNE_LOW, TUNE_HIGH = 0.2, 0.5
TUNE_SHRINK, TUNE_GROW = 0.8, 1.25
STREAM_CHUNK = 4096

Target = Callable[[np.ndarray], float]


def normal_increments(u: np.ndarray) -> np.ndarray:
    """Standard normal quantiles of uniforms in [0,1)."""
    u = np.asarray(u, dtype=float)
    return ndtri(np.where(u <= 0.0, ZERO_UNIFORM, u))


def _log_density(target: Target, x, cfg: MhConfig, log_target: bool) -> float:
    if np.any(x < cfg.support_low) or np.any(x > cfg.support_high):
        return -np.inf
    value = float(target(x))
    if np.isnan(value):
        raise NumericalError(f"target density is NaN at {x.tolist()}")
    if log_target:
        return value
    if value < 0:
        raise NumericalError(f"target density is negative ({value}) at {x.tolist()}")
    return np.log(value) if value > 0 else -np.inf


def _transition(state: ChainState, point: np.ndarray, target: Target, cfg: MhConfig,
                scale: np.ndarray, log_target: bool) -> ChainState:
    return _advance(state, normal_increments(point[:cfg.dim]), point[cfg.dim], target, cfg, scale, log_target)


def _advance(state: ChainState, z: np.ndarray, z_hat: float, target: Target, cfg: MhConfig,
             scale: np.ndarray, log_target: bool) -> ChainState:
    candidate = state.x + scale * z
    log_p = _log_density(target, candidate, cfg, log_target)
    # accept iff z < min(1, p(xi)/p(x)), compared in log space
    accept = log_p > -np.inf and (log_p >= state.log_p or z_hat == 0.0
                                   or np.log(z_hat) < log_p - state.log_p)
    if accept:
        return ChainState(candidate, log_p, state.accepted + 1, state.proposed + 1)
    return ChainState(state.x, state.log_p, state.accepted, state.proposed + 1)


def mh_step(state: ChainState, target: Target, cfg: MhConfig, log_target: bool = False) -> ChainState:
    """One MH transition using the next point of cfg.stream."""
    return _transition(state, cfg.stream.next_point(), target, cfg, cfg.proposal_scale, log_target)


def initial_state(target: Target, cfg: MhConfig, x0, log_target: bool = False) -> ChainState:
    x0 = np.asarray(x0, dtype=float).reshape(cfg.dim)
    log_p = _log_density(target, x0, cfg, log_target)
    if log_p == -np.inf:
        raise ZeroDensityError(f"initial point {x0.tolist()} has zero target density")
    return ChainState(x0, log_p)


def acceptance_rate(state: ChainState) -> float:
    if state.proposed == 0:
        raise UsageError("acceptance rate is undefined before the first proposal")
    return state.accepted / state.proposed


def _stream_steps(cfg: MhConfig, n: int):
    """(increment, accept uniform) pairs for the next n steps."""
    d = cfg.dim
    while n > 0:
        block = cfg.stream.next_block(min(n, STREAM_CHUNK))
        n -= len(block)
        yield from zip(normal_increments(block[:, :d]), block[:, d])


def run_chain(target: Target, cfg: MhConfig, x0, log_target: bool = False
              ) -> Tuple[np.ndarray, ChainDiagnostics]:
    """Burn in, then keep every thin-th state until n_samples are collected."""
    if cfg.stream.kind == StreamKind.SOBOL and not getattr(cfg.stream, "shuffle", True):
        logger.warning("Sobol stream read in sequence order; consecutive points are correlated "
                       "and the chain may not reach its target (use shuffle=True)")
    state = initial_state(target, cfg, x0, log_target)
    consumed_before = cfg.stream.coordinates_emitted
    scale = cfg.proposal_scale.copy()

    window_start = state
    for step, (z, z_hat) in enumerate(_stream_steps(cfg, cfg.burn_in), start=1):
        state = _advance(state, z, z_hat, target, cfg, scale, log_target)
        if cfg.auto_tune and step % TUNE_WINDOW == 0:
            rate = (state.accepted - window_start.accepted) / TUNE_WINDOW
            if rate < TUNE_LOW:
                scale = scale * TUNE_SHRINK
            elif rate > TUNE_HIGH:
                scale = scale * TUNE_GROW
            logger.debug("auto-tune at step %d: acceptance %.2f, scale %s", step, rate, scale.tolist())
            window_start = state

    burned = state
    samples = np.empty((cfg.n_samples, cfg.dim))
    steps = _stream_steps(cfg, cfg.n_samples * cfg.thin)
    for i in range(cfg.n_samples):
        for _ in range(cfg.thin):
            z, z_hat = next(steps)
            state = _advance(state, z, z_hat, target, cfg, scale, log_target)
        samples[i] = state.x

    proposed = state.proposed - burned.proposed
    rate = (state.accepted - burned.accepted) / proposed if proposed else float("nan")
    diagnostics = ChainDiagnostics(
        acceptance_rate=rate,
        n=cfg.n_samples,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        per_dim_mean=samples.mean(axis=0).tolist() if len(samples) else [],
        per_dim_std=samples.std(axis=0, ddof=1).tolist() if len(samples) > 1 else [],
        stream_kind=cfg.stream.kind.value,
        seed=cfg.stream.seed,
        proposal_scale=scale.tolist(),
        coordinates_consumed=cfg.stream.coordinates_emitted - consumed_before,
    )
    logger.info("MH chain (%s): %d samples, acceptance rate %.3f",
                diagnostics.stream_kind, cfg.n_samples, rate)
    return samples, diagnostics


def mixture_log_target(model: GaussianMixture) -> Target:
    """Fast log density of a mixture for use with run_chain(..., log_target=True)."""
    factors = model.cholesky_factors
    inv_factors = np.linalg.inv(factors)
    d = model.dim
    consts = (np.log(model.weights) - np.log(np.diagonal(factors, axis1=1, axis2=2)).sum(axis=1)
              - 0.5 * d * np.log(2 * np.pi))
    means = model.means

    def log_target(x):
        sol = np.einsum("mij,mj->mi", inv_factors, x - means)
        terms = consts - 0.5 * np.sum(sol * sol, axis=1)
        top = terms.max()
        return top + np.log(np.sum(np.exp(terms - top)))
    return log_target
