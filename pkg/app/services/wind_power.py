"""
Wind speed to farm power: turbine curve, farm aggregation and the
unity-based normalisation of measured speeds.
"""
import logging
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from app.errors import DataError, WindDataError
from app.models.wind_farm import RampShape, TurbineModel, WindFarm

logger = logging.getLogger(__name__)


def _scalar_or_array(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def power_curve(v, t: TurbineModel):
    """Single-turbine output (MW): 0 up to v_in, ramp to p_rated at v_r, 0 from v_out."""
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DataError("wind speed must be a non-negative number")
    if t.ramp == RampShape.CUBIC:
        ramp = t.p_rated * (arr ** 3 - t.v_in ** 3) / (t.v_r ** 3 - t.v_in ** 3)
    else:
        ramp = t.p_rated * (arr - t.v_in) / (t.v_r - t.v_in)
    out = np.select(
        [arr <= t.v_in, arr < t.v_r, arr < t.v_out],
        [0.0, ramp, t.p_rated],
        default=0.0,
    )
    return _scalar_or_array(out, arr.ndim == 0)


def farm_output(v, farm: WindFarm):
    """(P MW, Q MVAr) injected by the farm at wind speed v."""
    p = np.asarray(power_curve(v, farm.turbine)) * farm.n_turbines
    q = p * np.tan(np.arccos(farm.power_factor))
    scalar = np.ndim(v) == 0
    return _scalar_or_array(p, scalar), _scalar_or_array(q, scalar)


def denormalize(u, farm: WindFarm):
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DataError("normalised wind sample must lie in [0, 1]")
    out = farm.speed_min + arr * (farm.speed_max - farm.speed_min)
    return _scalar_or_array(out, arr.ndim == 0)


def normalize_columns(df: pd.DataFrame, allow_constant: bool = False
                      ) -> Tuple[pd.DataFrame, Dict[str, Tuple[float, float]]]:
    """Scale every column to [0, 1]; returns the frame and per-column (min, max).

    A constant column maps to 0 with bounds (v, v + 1) when allowed.
    """
    bounds = {}
    out = pd.DataFrame(index=df.index)
    for col in df.columns:
        lo, hi = float(df[col].min()), float(df[col].max())
        if hi == lo:
            if not allow_constant:
                raise WindDataError(f"degenerate column '{col}': all speeds equal {lo}")
            logger.warning("column '%s' is constant; normalised to 0", col)
            hi = lo + 1.0
        bounds[col] = (lo, hi)
        out[col] = (df[col] - lo) / (hi - lo)
    return out, bounds
