from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError

FLOOR = 1e-13


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_used: int

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2, "n_used": self.n_used}


def fit_rate(x, y, floor: float = FLOOR) -> RateFit:
    """Least-squares line through (log x, log y); points with y below floor are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > floor)
    if keep.sum() < 4:
        raise ConfigError(f"need at least 4 usable points for a rate fit, got {int(keep.sum())}")
    res = stats.linregress(np.log(x[keep]), np.log(y[keep]))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2), int(keep.sum()))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map; threads > 1 uses a thread pool (LAPACK releases the GIL)."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
