"""Monte Carlo p-values and Benjamini-Hochberg selection."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def monte_carlo_pvalue(observed: float, nulls) -> float:
    """Add-one Monte Carlo p-value.

    p = (#{null >= observed} + 1) / (R + 1), so p is never exactly zero and
    ties with the observed score count as exceedances. Null entries may be
    -inf (the sentinel for pairs that were incomplete under a rotation);
    those never exceed a finite observed score.
    """
    nulls = np.asarray(nulls, dtype=np.float64).ravel()
    if nulls.size == 0:
        raise ConfigError("p-value needs at least one null sample")
    if not np.isfinite(observed):
        raise ConfigError(f"observed score must be finite, got {observed!r}")
    exceed = int(np.count_nonzero(nulls >= observed))
    return (exceed + 1) / (nulls.size + 1)


def benjamini_hochberg(pvalues, alpha: float):
    """BH step-up procedure at level ``alpha``.

    Returns (reject, critical_p) where reject marks every input with
    p <= critical_p and critical_p is the largest p_(k) satisfying
    p_(k) <= k * alpha / N (inclusive), or 0.0 when nothing passes.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")
    p = np.asarray(pvalues, dtype=np.float64).ravel()
    n = p.size
    if n == 0:
        return np.zeros(0, dtype=bool), 0.0
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p > 1.0):
        raise ConfigError("p-values must lie in (0, 1]")
    p_sorted = np.sort(p, kind="stable")
    thresholds = alpha * np.arange(1, n + 1) / n
    passing = np.flatnonzero(p_sorted <= thresholds)
    if passing.size == 0:
        return np.zeros(n, dtype=bool), 0.0
    critical_p = float(p_sorted[passing[-1]])
    return p <= critical_p, critical_p
