"""Probabilistic OPF run configuration, output variables and reports."""
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.errors import DataError, UsageError
from app.models.mixture import GaussianMixture
from app.models.network import NetworkCase
from app.models.sampling import StreamKind
from app.models.wind_farm import WindFarm

REFERENCE_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1


class VariableKind(str, Enum):
    COST = "cost"
    BUS_V = "bus_v"
    BUS_THETA = "bus_theta"
    GEN_P = "gen_p"
    GEN_Q = "gen_q"
    BRANCH_P = "branch_p"
    BRANCH_S = "branch_s"


# per-sample dump column prefix of each variable kind
DUMP_PREFIX = {
    VariableKind.BUS_V: "v",
    VariableKind.BUS_THETA: "theta",
    VariableKind.GEN_P: "pg",
    VariableKind.GEN_Q: "qg",
    VariableKind.BRANCH_P: "p",
    VariableKind.BRANCH_S: "s",
}


@dataclass(frozen=True)
class OutputVariable:
    """A tracked output. `index` is a bus id for bus kinds and a 1-based
    position for generator and branch kinds."""
    kind: VariableKind
    index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VariableKind(self.kind))
        if (self.kind == VariableKind.COST) != (self.index is None):
            raise DataError(f"output variable {self.kind.value} needs "
                            f"{'no' if self.kind == VariableKind.COST else 'an'} index")

    @property
    def key(self) -> str:
        return self.kind.value if self.index is None else f"{self.kind.value}:{self.index}"

    @property
    def dump_column(self) -> str:
        return "cost" if self.index is None else f"{DUMP_PREFIX[self.kind]}_{self.index}"

    @classmethod
    def parse(cls, key: str) -> "OutputVariable":
        kind, _, index = key.strip().partition(":")
        try:
            return cls(VariableKind(kind), int(index) if index else None)
        except ValueError as e:
            raise DataError(f"unknown output variable '{key}'") from e

    def check(self, case: NetworkCase):
        if self.kind in (VariableKind.BUS_V, VariableKind.BUS_THETA):
            ok = self.index in case.bus_index
        elif self.kind in (VariableKind.GEN_P, VariableKind.GEN_Q):
            ok = 1 <= self.index <= len(case.gens)
        elif self.kind in (VariableKind.BRANCH_P, VariableKind.BRANCH_S):
            ok = 1 <= self.index <= len(case.branches)
        else:
            ok = True
        if not ok:
            raise DataError(f"output variable {self.key} does not exist in the case")

    @classmethod
    def all_for(cls, case: NetworkCase) -> List["OutputVariable"]:
        out = [cls(VariableKind.COST)]
        out += [cls(VariableKind.BUS_V, b) for b in case.bus_ids]
        out += [cls(VariableKind.BUS_THETA, b) for b in case.bus_ids]
        out += [cls(VariableKind.GEN_P, k + 1) for k in range(len(case.gens))]
        out += [cls(VariableKind.GEN_Q, k + 1) for k in range(len(case.gens))]
        out += [cls(VariableKind.BRANCH_P, i + 1) for i in range(len(case.branches))]
        out += [cls(VariableKind.BRANCH_S, i + 1) for i in range(len(case.branches))]
        return out


@dataclass
class FarmGroup:
    name: str
    mixture: GaussianMixture
    farms: List[WindFarm]

    def __post_init__(self):
        if self.mixture.dim != len(self.farms):
            raise DataError(f"group '{self.name}': mixture dimension {self.mixture.dim} "
                            f"does not match its {len(self.farms)} farms")


class LoadStream(str, Enum):
    INDEPENDENT = "independent"
    SHARED = "shared"


@dataclass
class SamplerSettings:
    """Per-run template from which each group's MhConfig is built."""
    stream_kind: StreamKind = StreamKind.SOBOL
    proposal_scale: float = 0.1
    burn_in: int = 1000
    thin: int = 1
    skip: int = 0
    auto_tune: bool = False
    randomize: bool = True
    x0: Optional[List[float]] = None

    def __post_init__(self):
        self.stream_kind = StreamKind(self.stream_kind)


@dataclass
class PopfConfig:
    case: NetworkCase
    farm_groups: List[FarmGroup]
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    load_sigma_frac: float = 0.05
    n_samples: int = 1000
    reference: Optional["ReferenceStats"] = None
    solver: str = "ac"
    seed: int = 0
    max_infeasible_frac: float = 0.05
    workers: int = 1
    load_stream: LoadStream = LoadStream.INDEPENDENT
    histogram_bins: int = 0
    fixed_wind_speeds: Optional[np.ndarray] = None   # (n_samples, total farms), m/s
    track: Optional[List[str]] = None
    include_timings: bool = False
    report_path: Optional[Path] = None
    dump_csv: Optional[Path] = None

    def __post_init__(self):
        self.load_stream = LoadStream(self.load_stream)
        if self.n_samples < 1:
            raise UsageError(f"n_samples must be at least 1, got {self.n_samples}")
        if self.solver not in ("ac", "dc"):
            raise UsageError(f"solver must be 'ac' or 'dc', got '{self.solver}'")
        if self.load_sigma_frac < 0:
            raise UsageError("load_sigma_frac must be non-negative")
        if not 0 <= self.max_infeasible_frac <= 1:
            raise UsageError("max_infeasible_frac must lie in [0, 1]")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        for group in self.farm_groups:
            for farm in group.farms:
                if farm.bus not in self.case.bus_index:
                    raise DataError(f"farm {farm.label} of group '{group.name}' sits on unknown bus {farm.bus}")
        if self.fixed_wind_speeds is not None:
            speeds = np.asarray(self.fixed_wind_speeds, dtype=float)
            if speeds.ndim == 1:
                speeds = speeds.reshape(-1, 1)
            if speeds.shape != (self.n_samples, self.n_farms):
                raise DataError(f"fixed wind speeds must be {self.n_samples} x {self.n_farms}, "
                                f"got {speeds.shape}")
            self.fixed_wind_speeds = speeds
        for var in self.tracked_variables():
            var.check(self.case)

    @property
    def farms(self) -> List[WindFarm]:
        return [farm for group in self.farm_groups for farm in group.farms]

    @property
    def n_farms(self) -> int:
        return len(self.farms)

    def tracked_variables(self) -> List[OutputVariable]:
        if self.track is None:
            return OutputVariable.all_for(self.case)
        return [OutputVariable.parse(key) for key in self.track]


def _json_float(x):
    x = float(x)
    return None if math.isnan(x) or math.isinf(x) else x


@dataclass
class OutputStats:
    mean: float
    std: float
    count: int
    eps_mu: Optional[float] = None      # percent
    eps_sigma: Optional[float] = None
    histogram: Optional[Dict[str, list]] = None

    def to_dict(self) -> dict:
        out = {"mean": _json_float(self.mean), "std": _json_float(self.std), "count": self.count}
        if self.eps_mu is not None or self.eps_sigma is not None:
            out["eps_mu_pct"] = None if self.eps_mu is None else _json_float(self.eps_mu)
            out["eps_sigma_pct"] = None if self.eps_sigma is None else _json_float(self.eps_sigma)
        if self.histogram is not None:
            out["histogram"] = self.histogram
        return out


@dataclass
class ReferenceStats:
    method: str
    n: int
    seed: int
    stats: Dict[str, OutputStats]

    def to_dict(self) -> dict:
        return {
            "schema_version": REFERENCE_SCHEMA_VERSION,
            "method": self.method,
            "n": self.n,
            "seed": self.seed,
            "variables": {key: {"mean": _json_float(s.mean), "std": _json_float(s.std), "count": s.count}
                          for key, s in self.stats.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceStats":
        version = data.get("schema_version")
        if version != REFERENCE_SCHEMA_VERSION:
            raise DataError(f"unsupported reference schema version {version}")
        try:
            stats = {
                key: OutputStats(mean=float("nan") if v["mean"] is None else float(v["mean"]),
                                 std=float("nan") if v["std"] is None else float(v["std"]),
                                 count=int(v["count"]))
                for key, v in data["variables"].items()
            }
            return cls(method=str(data["method"]), n=int(data["n"]), seed=int(data["seed"]), stats=stats)
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise DataError(f"malformed reference statistics: {e}") from e


@dataclass
class PopfReport:
    n_samples: int
    infeasible_count: int
    solver: str
    stream_kind: str
    seed: int
    stats: Dict[str, OutputStats] = field(default_factory=dict)
    diagnostics: Dict[str, dict] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    reference: Optional[dict] = None
    per_sample: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def success_count(self) -> int:
        return self.n_samples - self.infeasible_count

    @property
    def infeasible_fraction(self) -> float:
        return self.infeasible_count / self.n_samples

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_samples": self.n_samples,
            "success_count": self.success_count,
            "infeasible_count": self.infeasible_count,
            "solver": self.solver,
            "stream_kind": self.stream_kind,
            "seed": self.seed,
            "variables": {key: s.to_dict() for key, s in self.stats.items()},
            "diagnostics": self.diagnostics,
        }
        if self.reference is not None:
            out["reference"] = self.reference
        if include_timings:
            out["timings"] = self.timings
        return out
