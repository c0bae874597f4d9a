"""Log-scale weighted averages with batch-means error bars."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_BATCHES = 32


@dataclass(frozen=True)
class LogMean:
    """log of a Monte Carlo mean of exp(logw) with its log-scale std error."""

    log_value: float
    std_error: float
    ess: float
    samples: int


def log_mean_exp(logw: np.ndarray) -> float:
    logw = np.asarray(logw, dtype=float)
    m = float(logw.max())
    if not math.isfinite(m):
        return m
    return m + math.log(math.fsum(np.exp(logw - m))) - math.log(logw.size)


def batch_log_mean(logw: np.ndarray, batches: int = MIN_BATCHES) -> LogMean:
    """Mean of exp(logw) in log scale.

    The error is from contiguous batch means, converted to log scale by the
    delta method.  Constant weights give a zero error.
    """
    logw = np.asarray(logw, dtype=float)
    n = logw.size
    if n == 0:
        raise ValueError("no samples")
    m = float(logw.max())
    if not math.isfinite(m):
        return LogMean(-math.inf, math.inf, 0.0, n)
    w = np.exp(logw - m)
    mean = math.fsum(w) / n
    ess = math.fsum(w) ** 2 / math.fsum(w * w)
    if np.all(logw == logw[0]):
        return LogMean(float(logw[0]), 0.0, float(n), n)
    b = max(1, min(batches, n))
    parts = np.array_split(w, b)
    bm = np.array([p.mean() for p in parts])
    sizes = np.array([p.size for p in parts])
    if b > 1:
        var = float(np.sum(sizes * (bm - mean) ** 2) / (b - 1)) / n
        se = math.sqrt(var)
    else:
        se = math.inf
    return LogMean(m + math.log(mean), se / mean, ess, n)


def indicator_mean(hits: np.ndarray, batches: int = MIN_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of a 0/1 or real sample."""
    x = np.asarray(hits, dtype=float)
    mean = float(x.mean())
    b = max(2, min(batches, x.size))
    bm = np.array([p.mean() for p in np.array_split(x, b)])
    se = float(bm.std(ddof=1) / math.sqrt(b))
    return mean, se
