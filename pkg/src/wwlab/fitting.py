"""Log-log regression helpers shared by the order and exponent experiments."""
from __future__ import annotations

import numpy as np


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two paired samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive samples")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def loglog_fit(x, y):
    """Return (slope, intercept, rms residual) of the log-log line."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    coef = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coef, lx)
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))
