"""
Reference statistics and method comparison tables.
"""
import dataclasses
import logging
from typing import Iterable, Optional

import pandas as pd

from app.errors import MissingReferenceError
from app.models.popf import PopfConfig, ReferenceStats
from app.models.sampling import StreamKind
from app.services.popf_engine import reference_from_report, relative_error_pct, run_popf

logger = logging.getLogger(__name__)

COMPARE_COLUMNS = ["variable", "method", "N", "mean", "eps_mu_pct", "std", "eps_sigma_pct", "seed"]


def _with_run(cfg: PopfConfig, kind, n: int, seed: int, reference=None) -> PopfConfig:
    sampler = dataclasses.replace(cfg.sampler, stream_kind=StreamKind(kind))
    return dataclasses.replace(cfg, sampler=sampler, n_samples=n, seed=seed, reference=reference,
                               dump_csv=None, report_path=None, fixed_wind_speeds=None)


def compute_reference(cfg: PopfConfig, n: Optional[int] = None, seed: Optional[int] = None,
                      kind=StreamKind.SRS) -> ReferenceStats:
    """Statistics of a (large) plain Monte Carlo run used as ground truth."""
    n = cfg.n_samples if n is None else n
    seed = cfg.seed if seed is None else seed
    logger.info("computing %s reference with N=%d, seed=%d", StreamKind(kind).value, n, seed)
    report = run_popf(_with_run(cfg, kind, n, seed))
    return reference_from_report(report, method=StreamKind(kind).value)


def compare_methods(cfg: PopfConfig, kinds: Iterable, sizes: Iterable[int],
                    seeds: Optional[Iterable[int]] = None,
                    reference: Optional[ReferenceStats] = None) -> pd.DataFrame:
    """One row per (variable, method, N, seed) with error indices against the reference."""
    reference = reference or cfg.reference
    if reference is None:
        raise MissingReferenceError("compare needs reference statistics; compute them first")
    seeds = [cfg.seed] if seeds is None else list(seeds)

    rows = []
    for kind in kinds:
        kind = StreamKind(kind)
        for n in sizes:
            for seed in seeds:
                report = run_popf(_with_run(cfg, kind, n, seed, reference))
                for key, stats in report.stats.items():
                    if key not in reference.stats:
                        continue
                    ref = reference.stats[key]
                    rows.append({
                        "variable": key, "method": kind.value, "N": n,
                        "mean": stats.mean, "eps_mu_pct": relative_error_pct(ref.mean, stats.mean),
                        "std": stats.std, "eps_sigma_pct": relative_error_pct(ref.std, stats.std),
                        "seed": seed,
                    })
                logger.info("compared %s at N=%d (seed %d)", kind.value, n, seed)
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)
