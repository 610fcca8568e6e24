from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def fit_decay_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be one-dimensional and of equal length")
    if x.size < 3:
        raise ValueError("at least three points are needed for a slope fit")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("log-log fit requires strictly positive values")
    lx, ly = np.log(x), np.log(y)
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def median_iqr(values: Sequence[float]) -> tuple[float, float, float]:
    """Median and the 25th/75th percentiles, ignoring NaN entries."""
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return math.nan, math.nan, math.nan
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(med), float(q1), float(q3)


def variance_overhead(estimates: Sequence[float], reference: Sequence[float]) -> float:
    """``Var(estimates) / Var(reference) - 1`` with unbiased variances."""
    return float(np.var(estimates, ddof=1) / np.var(reference, ddof=1) - 1.0)
