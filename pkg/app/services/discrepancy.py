"""
Star discrepancy of point sets in the unit cube.

The 1-D value is exact. For d <= 3 the sup over anchored boxes is
bracketed on a rectilinear grid built from the data coordinates plus a
uniform mesh: corners give a lower bound, and every grid cell gives an
upper bound through the monotonicity of volume and point counts.
"""
from typing import NamedTuple

import numpy as np

from app.errors import DataError, UsageError

MAX_GRID_DIM = 3
CELL_BUDGET = 20_000_000
DEFAULT_RESOLUTION = 256


class DiscrepancyBracket(NamedTuple):
    lower: float
    upper: float


def _check_unit_cube(points: np.ndarray):
    if len(points) == 0:
        raise UsageError("star discrepancy of an empty point set is undefined")
    if not np.all(np.isfinite(points)) or np.any(points < 0) or np.any(points > 1):
        raise DataError("points must lie in the unit cube [0,1]^d")


def star_discrepancy_1d(points) -> float:
    x = np.sort(np.asarray(points, dtype=float).ravel())
    _check_unit_cube(x)
    n = len(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))


def _anchored_counts(points, grids, side):
    """counts[i1..id] = #points with x_j < g_j[i_j] (side='right') or x_j <= g_j[i_j] (side='left')."""
    shape = tuple(len(g) + 1 for g in grids)
    idx = tuple(np.searchsorted(g, points[:, j], side=side) for j, g in enumerate(grids))
    hist = np.zeros(shape)
    np.add.at(hist, idx, 1.0)
    for axis in range(len(grids)):
        hist = np.cumsum(hist, axis=axis)
    return hist[tuple(slice(0, len(g)) for g in grids)]


def _outer_product(vectors):
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


def star_discrepancy_grid(points, resolution: int = DEFAULT_RESOLUTION) -> DiscrepancyBracket:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise UsageError(f"points must be an n x d matrix, got shape {pts.shape}")
    d = pts.shape[1]
    if d > MAX_GRID_DIM:
        raise UsageError(f"grid discrepancy supports d <= {MAX_GRID_DIM}, got d={d}")
    if resolution < 1:
        raise UsageError(f"resolution must be at least 1, got {resolution}")
    _check_unit_cube(pts)
    n = len(pts)

    mesh = np.linspace(0.0, 1.0, resolution + 1)
    grids = [np.unique(np.concatenate([mesh, pts[:, j]])) for j in range(d)]
    cells = int(np.prod([len(g) for g in grids], dtype=float))
    if cells > CELL_BUDGET:
        raise UsageError(f"discrepancy grid of {cells} cells exceeds the budget of {CELL_BUDGET}; "
                         f"lower the resolution or the point count")

    open_counts = _anchored_counts(pts, grids, side="right") / n
    closed_counts = _anchored_counts(pts, grids, side="left") / n
    vol = _outer_product(grids)
    lower = max(np.max(vol - open_counts), np.max(closed_counts - vol))

    lo = tuple(slice(0, -1) for _ in grids)
    hi = tuple(slice(1, None) for _ in grids)
    upper = max(np.max(vol[hi] - open_counts[lo]), np.max(closed_counts[hi] - vol[lo]))
    return DiscrepancyBracket(float(lower), float(max(upper, lower)))
