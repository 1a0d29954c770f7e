# app/config.py
"""
TOML run configuration -> PopfConfig.

Tables: [run], [sampler], one [[group]] per farm group (name + model file)
and one [[farm]] per wind farm (group, bus, turbine data). Relative paths
resolve against the directory holding the config file. The worker count
can be overridden through the POPF_WORKERS environment variable.
"""
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional

try:
    import tomllib
except ModuleNotFoundError:   # Python < 3.11
    import tomli as tomllib

import numpy as np
import pandas as pd

from app.errors import ConfigError, DataError, UsageError
from app.models.popf import FarmGroup, PopfConfig, SamplerSettings
from app.models.wind_farm import TurbineModel, WindFarm
from app.services.case_parser import remove_generators
from storage.artifacts import load_case, load_model, load_reference, read_text
from storage.paths import resolve

logger = logging.getLogger(__name__)

WORKERS_ENV = "POPF_WORKERS"

RUN_KEYS = {
    "case", "remove_generators", "n_samples", "seed", "solver", "load_sigma_frac",
    "max_infeasible_frac", "workers", "load_stream", "histogram_bins", "track",
    "reference", "report", "dump_csv", "include_timings", "fixed_wind_speeds",
}
SAMPLER_KEYS = {"stream", "proposal_scale", "burn_in", "thin", "skip", "auto_tune", "randomize", "x0"}
GROUP_KEYS = {"name", "model"}
FARM_KEYS = {
    "group", "bus", "name", "column", "n_turbines", "power_factor", "maintenance_cost",
    "p_min", "p_max", "speed_min", "speed_max", "v_in", "v_r", "v_out", "p_rated", "ramp",
}
TOP_KEYS = {"run", "sampler", "group", "farm"}
TURBINE_KEYS = ("v_in", "v_r", "v_out", "p_rated", "ramp")


def _check_keys(table: dict, allowed: set, where: str):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _env_workers(default: int) -> int:
    raw = os.getenv(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{raw}'") from None
    logger.debug("worker count %d taken from %s", workers, WORKERS_ENV)
    return workers


def _sampler(table: dict) -> SamplerSettings:
    _check_keys(table, SAMPLER_KEYS, "[sampler]")
    kwargs = dict(table)
    if "stream" in kwargs:
        kwargs["stream_kind"] = kwargs.pop("stream")
    return SamplerSettings(**kwargs)


def _farm(entry: dict, bounds, index: int) -> WindFarm:
    turbine_args = {k: entry[k] for k in TURBINE_KEYS if k in entry}
    speed_min = entry.get("speed_min", bounds[0] if bounds else None)
    speed_max = entry.get("speed_max", bounds[1] if bounds else None)
    if speed_min is None or speed_max is None:
        raise ConfigError(f"farm {index}: no speed bounds in the model file; set speed_min/speed_max")
    farm_args = {k: entry[k] for k in ("n_turbines", "power_factor", "maintenance_cost", "p_min", "p_max")
                 if k in entry}
    return WindFarm(bus=int(entry["bus"]), speed_min=float(speed_min), speed_max=float(speed_max),
                    turbine=TurbineModel(**turbine_args), name=str(entry.get("name", "")), **farm_args)


def _groups(groups: List[dict], farms: List[dict], base: Path) -> List[FarmGroup]:
    if not groups:
        raise ConfigError("at least one [[group]] is required")
    by_group: Dict[str, List[dict]] = {}
    for i, entry in enumerate(farms, start=1):
        _check_keys(entry, FARM_KEYS, f"[[farm]] #{i}")
        for key in ("group", "bus"):
            if key not in entry:
                raise ConfigError(f"[[farm]] #{i} needs '{key}'")
        by_group.setdefault(entry["group"], []).append(entry)

    names = set()
    out = []
    for i, entry in enumerate(groups, start=1):
        _check_keys(entry, GROUP_KEYS, f"[[group]] #{i}")
        if "name" not in entry or "model" not in entry:
            raise ConfigError(f"[[group]] #{i} needs 'name' and 'model'")
        name = entry["name"]
        if name in names:
            raise ConfigError(f"group '{name}' defined twice")
        names.add(name)
        stored = load_model(resolve(entry["model"], base))
        members = by_group.get(name, [])
        wind_farms = []
        for pos, farm in enumerate(members):
            bounds = stored.bounds.get(farm["column"]) if "column" in farm else stored.bounds_for(pos)
            wind_farms.append(_farm(farm, bounds, pos + 1))
        out.append(FarmGroup(name=name, mixture=stored.mixture, farms=wind_farms))

    orphans = sorted(set(by_group) - names)
    if orphans:
        raise ConfigError(f"farms reference undefined group(s): {', '.join(map(str, orphans))}")
    return out


def _fixed_speeds(path: Path) -> np.ndarray:
    text = read_text(path)   # names the path when missing
    if not text.strip():
        raise ConfigError(f"{path}: fixed wind speed file is empty")
    try:
        return pd.read_csv(path).to_numpy(dtype=float)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"{path}: fixed wind speeds must be a numeric CSV: {e}") from e


def parse_config(data: dict, base: Path) -> PopfConfig:
    """Build a PopfConfig from an already-parsed TOML document."""
    _check_keys(data, TOP_KEYS, "config")
    run = data.get("run", {})
    _check_keys(run, RUN_KEYS, "[run]")
    if "case" not in run:
        raise ConfigError("[run] needs 'case'")

    case = load_case(resolve(run["case"], base))
    if run.get("remove_generators"):
        case = remove_generators(case, run["remove_generators"])

    try:
        reference = load_reference(resolve(run["reference"], base)) if run.get("reference") else None
        fixed = _fixed_speeds(resolve(run["fixed_wind_speeds"], base)) if run.get("fixed_wind_speeds") else None
        return PopfConfig(
            case=case,
            farm_groups=_groups(data.get("group", []), data.get("farm", []), base),
            sampler=_sampler(data.get("sampler", {})),
            load_sigma_frac=float(run.get("load_sigma_frac", 0.05)),
            n_samples=int(run.get("n_samples", 1000)),
            reference=reference,
            solver=str(run.get("solver", "ac")),
            seed=int(run.get("seed", 0)),
            max_infeasible_frac=float(run.get("max_infeasible_frac", 0.05)),
            workers=_env_workers(int(run.get("workers", 1))),
            load_stream=run.get("load_stream", "independent"),
            histogram_bins=int(run.get("histogram_bins", 0)),
            fixed_wind_speeds=fixed,
            track=run.get("track"),
            include_timings=bool(run.get("include_timings", False)),
            report_path=resolve(run["report"], base) if run.get("report") else None,
            dump_csv=resolve(run["dump_csv"], base) if run.get("dump_csv") else None,
        )
    except (UsageError, DataError):
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration value: {e}") from e


def load_config(path: Path, overrides: Optional[dict] = None) -> PopfConfig:
    """Read a TOML run config; `overrides` replaces [run] keys (CLI flags)."""
    path = Path(path).resolve()
    text = read_text(path)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    if overrides:
        data.setdefault("run", {}).update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = parse_config(data, path.parent)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.info("loaded config %s: %d group(s), %d farm(s), N=%d, solver=%s",
                path, len(cfg.farm_groups), cfg.n_farms, cfg.n_samples, cfg.solver)
    return cfg
