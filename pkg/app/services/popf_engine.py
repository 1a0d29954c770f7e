"""
Probabilistic OPF driver.

Wind speeds are drawn per farm group by a Metropolis-Hastings chain over
the group's mixture (or taken from a fixed list), loads are drawn from
truncated normals, every sample is solved as a deterministic OPF and the
successful solves are reduced to per-variable statistics.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.errors import InfeasibleBudgetError, ZeroReferenceError
from app.models.network import NetworkCase
from app.models.opf import Injections, OpfSolution
from app.models.popf import (
    FarmGroup, LoadStream, OutputStats, OutputVariable, PopfConfig, PopfReport, ReferenceStats,
)
from app.models.sampling import MhConfig, StreamKind, UniformStream
from app.services.mh_sampler import mixture_log_target, normal_increments, run_chain
from app.services.opf_solver import solve_opf
from app.services.uniform_streams import SrsStream, make_stream
from app.services.wind_power import denormalize, farm_output

logger = logging.getLogger(__name__)

WIND_SPEED_MARGIN = 5.0     # m/s above cut-out
NEAR_ZERO = 1e-12
X0_EDGE = 1e-6


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ----------------------------------------------------------
# Error index
# ----------------------------------------------------------

def error_index(reference: float, simulated: float) -> float:
    """|(I_a - I_s) / I_a| in percent."""
    if reference == 0:
        raise ZeroReferenceError("error index is undefined for a zero reference value")
    return abs((reference - simulated) / reference) * 100.0


def relative_error_pct(reference: float, simulated: float) -> float:
    """error_index that tolerates (near-)zero references: 0 when both vanish, NaN otherwise."""
    if np.isnan(reference) or np.isnan(simulated):
        return float("nan")
    if abs(reference) <= NEAR_ZERO * max(1.0, abs(simulated)):
        return 0.0 if abs(simulated) <= NEAR_ZERO * max(1.0, abs(reference)) else float("nan")
    return error_index(reference, simulated)


# ----------------------------------------------------------
# Loads
# ----------------------------------------------------------

def loaded_buses(case: NetworkCase) -> List[int]:
    return [i for i, bus in enumerate(case.buses) if bus.p_load != 0 or bus.q_load != 0]


def sample_loads(case: NetworkCase, n: int, stream: UniformStream,
                 sigma_frac: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """(P, Q) load draws in MW/MVAr, each n x n_bus.

    Every loaded bus gets one normal factor 1 + sigma_frac * z, truncated
    at 0, applied to both P and Q so the base power factor is kept. The
    stream is read as a flat sequence of scalars.
    """
    p_base, q_base = case.load_vectors()
    p = np.tile(p_base, (n, 1))
    q = np.tile(q_base, (n, 1))
    idx = loaded_buses(case)
    if n == 0 or not idx or sigma_frac == 0:
        return p, q
    needed = n * len(idx)
    n_points = -(-needed // stream.dim)
    u = stream.next_block(n_points).ravel()[:needed].reshape(n, len(idx))
    factor = np.maximum(1.0 + sigma_frac * normal_increments(u), 0.0)
    p[:, idx] = p_base[idx] * factor
    q[:, idx] = q_base[idx] * factor
    return p, q


def _load_stream(cfg: PopfConfig, dim: int) -> UniformStream:
    seed = _derived_seed(cfg.seed, 0x10AD)
    if cfg.load_stream == LoadStream.SHARED:
        return make_stream(cfg.sampler.stream_kind, dim, seed=seed, randomize=cfg.sampler.randomize)
    return SrsStream(dim, seed=seed)


# ----------------------------------------------------------
# Wind
# ----------------------------------------------------------

def _sample_group(group: FarmGroup, index: int, cfg: PopfConfig) -> Tuple[np.ndarray, dict]:
    """Normalised wind samples (n x D) of one group and the chain diagnostics."""
    settings = cfg.sampler
    d = group.mixture.dim
    stream = make_stream(settings.stream_kind, d + 1, seed=_derived_seed(cfg.seed, index),
                         skip=settings.skip, randomize=settings.randomize, shuffle=True)
    mh = MhConfig(dim=d, stream=stream, proposal_scale=settings.proposal_scale,
                  burn_in=settings.burn_in, n_samples=cfg.n_samples, thin=settings.thin,
                  auto_tune=settings.auto_tune)
    if settings.x0 is not None:
        x0 = np.asarray(settings.x0, dtype=float)
    else:
        x0 = np.clip(group.mixture.weights @ group.mixture.means, X0_EDGE, 1 - X0_EDGE)
    samples, diag = run_chain(mixture_log_target(group.mixture), mh, x0, log_target=True)
    return samples, diag.to_dict()


def sample_wind_speeds(cfg: PopfConfig) -> Tuple[np.ndarray, Dict[str, dict]]:
    """Wind speeds (n x total farms, m/s) in group order, plus per-group diagnostics."""
    if cfg.fixed_wind_speeds is not None:
        return np.asarray(cfg.fixed_wind_speeds, dtype=float), {}
    columns, diagnostics = [], {}
    for index, group in enumerate(cfg.farm_groups):
        u, diag = _sample_group(group, index, cfg)
        diagnostics[group.name] = diag
        for j, farm in enumerate(group.farms):
            speed = denormalize(np.clip(u[:, j], 0.0, 1.0), farm)
            columns.append(np.clip(speed, 0.0, farm.turbine.v_out + WIND_SPEED_MARGIN))
    speeds = np.column_stack(columns) if columns else np.empty((cfg.n_samples, 0))
    return speeds, diagnostics


def build_injections(cfg: PopfConfig, speeds: np.ndarray, p_load: np.ndarray,
                     q_load: np.ndarray) -> List[Injections]:
    case = cfg.case
    farms = cfg.farms
    fixed_cost = float(sum(f.maintenance_cost for f in farms))
    bus_ids = case.bus_ids
    idx = loaded_buses(case)
    out = []
    for s in range(len(speeds)):
        wind_p, wind_q, p_lo, p_hi = {}, {}, {}, {}
        for j, farm in enumerate(farms):
            p, q = farm_output(speeds[s, j], farm)
            if p > farm.p_upper or p < farm.p_lower:
                # curtail to the connection bounds, keeping the power factor
                clipped = min(max(p, farm.p_lower), farm.p_upper)
                q = q * clipped / p if p else 0.0
                p = clipped
            wind_p[farm.bus] = wind_p.get(farm.bus, 0.0) + p
            wind_q[farm.bus] = wind_q.get(farm.bus, 0.0) + q
            p_lo[farm.bus] = p_lo.get(farm.bus, 0.0) + farm.p_lower
            p_hi[farm.bus] = p_hi.get(farm.bus, 0.0) + farm.p_upper
        out.append(Injections(
            wind_p=wind_p, wind_q=wind_q,
            load_p={bus_ids[i]: float(p_load[s, i]) for i in idx},
            load_q={bus_ids[i]: float(q_load[s, i]) for i in idx},
            fixed_cost=fixed_cost, wind_p_min=p_lo, wind_p_max=p_hi,
        ))
    return out


# ----------------------------------------------------------
# Solving and reduction
# ----------------------------------------------------------

def _solve_one(case: NetworkCase, inj: Injections, solver: str) -> OpfSolution:
    return solve_opf(case, inj, solver)


def solve_samples(case: NetworkCase, injections: List[Injections], solver: str,
                  workers: int = 1) -> List[OpfSolution]:
    """Solve every sample; results come back in sample order."""
    if workers <= 1 or len(injections) < 2:
        return [_solve_one(case, inj, solver) for inj in injections]
    chunk = max(1, len(injections) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_one, repeat(case), injections, repeat(solver), chunksize=chunk))


def per_sample_frame(case: NetworkCase, solutions: List[OpfSolution]) -> pd.DataFrame:
    """One row per sample with the dump columns sample_id, status, cost, v_*, theta_*, pg_*, qg_*, p_*, s_*."""
    bus_ids = case.bus_ids
    ng, nl = len(case.gens), len(case.branches)
    columns = (["sample_id", "status", "cost"]
               + [f"v_{b}" for b in bus_ids] + [f"theta_{b}" for b in bus_ids]
               + [f"pg_{k + 1}" for k in range(ng)] + [f"qg_{k + 1}" for k in range(ng)]
               + [f"p_{i + 1}" for i in range(nl)] + [f"s_{i + 1}" for i in range(nl)])
    rows = []
    for sid, sol in enumerate(solutions):
        rows.append([sid, sol.status.value, sol.cost, *sol.v, *sol.theta, *sol.p_gen, *sol.q_gen,
                     *sol.branch_p, *sol.branch_s])
    return pd.DataFrame(rows, columns=columns)


def _histogram(values: np.ndarray, bins: int) -> Optional[dict]:
    if bins <= 0 or len(values) == 0:
        return None
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def summarize(frame: pd.DataFrame, variables: List[OutputVariable], histogram_bins: int = 0,
              reference: Optional[ReferenceStats] = None) -> Dict[str, OutputStats]:
    ok = frame[frame["status"] == "optimal"]
    stats = {}
    for var in variables:
        values = ok[var.dump_column].to_numpy(dtype=float)
        count = len(values)
        mean = float(values.mean()) if count else float("nan")
        std = float(values.std(ddof=1)) if count > 1 else (0.0 if count else float("nan"))
        entry = OutputStats(mean=mean, std=std, count=count, histogram=_histogram(values, histogram_bins))
        if reference is not None and var.key in reference.stats:
            ref = reference.stats[var.key]
            entry.eps_mu = relative_error_pct(ref.mean, mean)
            entry.eps_sigma = relative_error_pct(ref.std, std)
        stats[var.key] = entry
    return stats


def run_popf(cfg: PopfConfig) -> PopfReport:
    timings = {}
    t0 = time.perf_counter()
    speeds, diagnostics = sample_wind_speeds(cfg)
    idx = loaded_buses(cfg.case)
    load_stream = _load_stream(cfg, max(1, len(idx)))
    p_load, q_load = sample_loads(cfg.case, cfg.n_samples, load_stream, cfg.load_sigma_frac)
    injections = build_injections(cfg, speeds, p_load, q_load)
    timings["sampling_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    solutions = solve_samples(cfg.case, injections, cfg.solver, cfg.workers)
    timings["solving_s"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    frame = per_sample_frame(cfg.case, solutions)
    infeasible = int((frame["status"] != "optimal").sum())
    stats = summarize(frame, cfg.tracked_variables(), cfg.histogram_bins, cfg.reference)
    timings["aggregation_s"] = time.perf_counter() - t2

    report = PopfReport(
        n_samples=cfg.n_samples, infeasible_count=infeasible, solver=cfg.solver,
        stream_kind="fixed" if cfg.fixed_wind_speeds is not None else cfg.sampler.stream_kind.value,
        seed=cfg.seed, stats=stats, diagnostics=diagnostics, timings=timings, per_sample=frame,
        reference=(None if cfg.reference is None else
                   {"method": cfg.reference.method, "n": cfg.reference.n, "seed": cfg.reference.seed}),
    )
    if infeasible:
        logger.warning("%d of %d samples had no optimal OPF solution", infeasible, cfg.n_samples)
    logger.info("POPF finished: %d samples, %d infeasible, %.2fs", cfg.n_samples, infeasible,
                sum(timings.values()))
    if report.infeasible_fraction > cfg.max_infeasible_frac:
        raise InfeasibleBudgetError(
            f"{infeasible} of {cfg.n_samples} samples infeasible "
            f"({report.infeasible_fraction:.1%} > allowed {cfg.max_infeasible_frac:.1%})",
            report=report)
    return report


def reference_from_report(report: PopfReport, method: str = StreamKind.SRS.value) -> ReferenceStats:
    stats = {key: OutputStats(mean=s.mean, std=s.std, count=s.count) for key, s in report.stats.items()}
    return ReferenceStats(method=method, n=report.n_samples, seed=report.seed, stats=stats)
