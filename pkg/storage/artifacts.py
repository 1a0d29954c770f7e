# storage/artifacts.py
"""
Reading and writing of every file the tool consumes or produces:
case files, fitted mixture models, reports, reference statistics,
per-sample dumps and comparison tables.

All JSON outputs carry a `schema_version` field.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from app.errors import ArtifactError, CaseParseError, CaseValidationError, DataError
from app.models.mixture import FitResult, GaussianMixture
from app.models.network import NetworkCase
from app.models.popf import PopfReport, ReferenceStats
from app.services.case_parser import parse_case
from storage.paths import ensure_parent

logger = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1


# ----------------------------------------------------------
# Plain files
# ----------------------------------------------------------

def read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ArtifactError(f"file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e


def read_json(path: Path) -> dict:
    text = read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ArtifactError(f"{path}: expected a JSON object")
    return data


def write_json(path: Path, data: dict) -> Path:
    path = ensure_parent(Path(path))
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    logger.debug("wrote %s", path)
    return path


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path = ensure_parent(Path(path))
    frame.to_csv(path, index=False)
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


# ----------------------------------------------------------
# Cases
# ----------------------------------------------------------

def load_case(path: Path) -> NetworkCase:
    """Parse a MATPOWER .m or canonical JSON case; errors name the file."""
    text = read_text(path)
    try:
        return parse_case(text)
    except CaseParseError as e:
        err = CaseParseError(f"{path}: {e}")
        err.line = e.line
        raise err from e
    except CaseValidationError as e:
        raise CaseValidationError(f"{path}: {e}") from e


# ----------------------------------------------------------
# Fitted mixture models
# ----------------------------------------------------------

@dataclass
class StoredModel:
    """A fitted group mixture together with the normalisation bounds of its farms."""
    group: str
    columns: List[str]
    mixture: GaussianMixture
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    log_likelihood: Optional[float] = None
    iterations: Optional[int] = None

    def bounds_for(self, position: int) -> Optional[Tuple[float, float]]:
        if position >= len(self.columns):
            return None
        return self.bounds.get(self.columns[position])

    def to_dict(self) -> dict:
        out = {
            "schema_version": MODEL_SCHEMA_VERSION,
            "group": self.group,
            "columns": list(self.columns),
            "bounds": {col: [float(lo), float(hi)] for col, (lo, hi) in self.bounds.items()},
            "mixture": self.mixture.to_dict(),
        }
        if self.log_likelihood is not None:
            out["log_likelihood"] = float(self.log_likelihood)
        if self.iterations is not None:
            out["iterations"] = int(self.iterations)
        return out


def model_from_fit(group: str, columns: List[str], fit: FitResult,
                   bounds: Dict[str, Tuple[float, float]]) -> StoredModel:
    return StoredModel(group=group, columns=list(columns), mixture=fit.model,
                       bounds={c: bounds[c] for c in columns},
                       log_likelihood=fit.log_likelihood, iterations=fit.iterations)


def save_model(path: Path, model: StoredModel) -> Path:
    return write_json(path, model.to_dict())


def load_model(path: Path) -> StoredModel:
    data = read_json(path)
    version = data.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ArtifactError(f"{path}: unsupported model schema version {version}")
    try:
        mixture = GaussianMixture.from_dict(data["mixture"])
        columns = [str(c) for c in data.get("columns", [])]
        bounds = {str(c): (float(lo), float(hi)) for c, (lo, hi) in data.get("bounds", {}).items()}
    except KeyError as e:
        raise ArtifactError(f"{path}: missing field {e.args[0]}") from None
    except DataError as e:
        raise ArtifactError(f"{path}: {e}") from e
    except (TypeError, ValueError) as e:
        raise ArtifactError(f"{path}: malformed model: {e}") from e
    if columns and len(columns) != mixture.dim:
        raise ArtifactError(f"{path}: {len(columns)} columns listed for a {mixture.dim}-D mixture")
    return StoredModel(group=str(data.get("group", Path(path).stem)), columns=columns,
                       mixture=mixture, bounds=bounds,
                       log_likelihood=data.get("log_likelihood"), iterations=data.get("iterations"))


# ----------------------------------------------------------
# Reports and references
# ----------------------------------------------------------

def save_report(path: Path, report: PopfReport, include_timings: bool = False) -> Path:
    return write_json(path, report.to_dict(include_timings=include_timings))


def save_reference(path: Path, reference: ReferenceStats) -> Path:
    return write_json(path, reference.to_dict())


def load_reference(path: Path) -> ReferenceStats:
    data = read_json(path)
    try:
        return ReferenceStats.from_dict(data)
    except DataError as e:
        raise ArtifactError(f"{path}: {e}") from e


def save_dump(path: Path, frame: pd.DataFrame) -> Path:
    return write_csv(path, frame)
