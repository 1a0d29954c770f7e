# storage/wind_csv.py
"""
Measured wind speed import.

The CSV has a header row naming the farms and one row per timestamp with
speeds in m/s. An optional leading `timestamp` column is dropped.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.errors import ArtifactError, WindDataError

logger = logging.getLogger(__name__)

TIME_COLUMNS = ("timestamp", "time", "datetime")


def read_wind_csv(path: Path) -> pd.DataFrame:
    """Rectangular frame of finite, non-negative speeds with at least two rows."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"file not found: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise WindDataError(f"{path}: file is empty") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise WindDataError(f"{path}: malformed CSV: {e}") from e

    df = df.drop(columns=[c for c in df.columns if str(c).strip().lower() in TIME_COLUMNS])
    if df.shape[1] == 0:
        raise WindDataError(f"{path}: no farm columns")
    if len(df) < 2:
        raise WindDataError(f"{path}: at least two rows of speeds are needed, got {len(df)}")

    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() & df.notna()
    if bad.any().any():
        col = bad.any().idxmax()
        raise WindDataError(f"{path}: non-numeric value in column '{col}'")
    if numeric.isna().any().any():
        col = numeric.isna().any().idxmax()
        raise WindDataError(f"{path}: missing value in column '{col}'")
    values = numeric.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise WindDataError(f"{path}: speeds must be finite")
    if np.any(values < 0):
        col = numeric.columns[(values < 0).any(axis=0)][0]
        raise WindDataError(f"{path}: negative speed in column '{col}'")

    numeric.columns = [str(c).strip() for c in numeric.columns]
    logger.info("read %d rows x %d farms from %s", len(numeric), numeric.shape[1], path)
    return numeric


def parse_group_spec(spec: Optional[str], columns: List[str]) -> Dict[str, List[str]]:
    """'north=f1,f2;south=f3' -> {'north': ['f1', 'f2'], 'south': ['f3']}.

    No spec puts every column in one group named 'all'.
    """
    if not spec:
        return {"all": list(columns)}
    groups: Dict[str, List[str]] = {}
    used = set()
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        name, sep, cols = part.partition("=")
        name = name.strip()
        if not sep or not name:
            raise WindDataError(f"bad group spec '{part}', expected NAME=COL[,COL...]")
        members = [c.strip() for c in cols.split(",") if c.strip()]
        if not members:
            raise WindDataError(f"group '{name}' lists no columns")
        for col in members:
            if col not in columns:
                raise WindDataError(f"group '{name}' references missing column '{col}'")
            if col in used:
                raise WindDataError(f"column '{col}' appears in more than one group")
            used.add(col)
        if name in groups:
            raise WindDataError(f"group '{name}' defined twice")
        groups[name] = members
    return groups
