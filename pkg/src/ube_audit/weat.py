"""Association statistics over sets of unit vectors.

The mean vector of a token set S is written S-bar; the dot product of two
such means equals the average pairwise cosine between the sets, which is
what every statistic below is built from. Sets are passed either as 2-d
arrays of unit row vectors or as token collections together with an
embedding that resolves them (``emb.rows(tokens)``).

All arithmetic is done in 64-bit floats regardless of storage precision.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def _rows(s, emb=None) -> np.ndarray:
    if emb is not None and not isinstance(s, np.ndarray):
        tokens = sorted(s) if isinstance(s, (set, frozenset)) else list(s)
        s = emb.rows(tokens)
    a = np.asarray(s, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ConfigError("token set must be a nonempty collection of vectors")
    return a


def set_mean(s, emb=None) -> np.ndarray:
    """Mean of the member unit vectors (float64)."""
    return _rows(s, emb).mean(axis=0)


def weat_s(x1, a1, x2, a2, emb=None) -> float:
    """Pairwise WEAT statistic.

    s(X1,A1,X2,A2) = (sum of X1 vectors - sum of X2 vectors) . (A1-bar - A2-bar).
    The target sides enter as sums, the attribute sides as means.
    """
    x1, x2 = _rows(x1, emb), _rows(x2, emb)
    a1, a2 = _rows(a1, emb), _rows(a2, emb)
    return float((x1.sum(axis=0) - x2.sum(axis=0)) @ (a1.mean(axis=0) - a2.mean(axis=0)))


def weat_g(groups, all_names, pool, emb=None) -> float:
    """Generalized multi-group WEAT statistic.

    g = sum_i (Xi-bar - mu) . (Ai-bar - pool-bar), where mu is the mean of
    the group means for two or more groups. For a single group that rule
    would force g = 0, so mu falls back to the mean over ``all_names``.
    """
    pairs = [(_rows(x, emb), _rows(a, emb)) for x, a in groups]
    if not pairs:
        raise ConfigError("weat_g needs at least one (group, attributes) pair")
    group_means = np.stack([x.mean(axis=0) for x, _ in pairs])
    attr_means = np.stack([a.mean(axis=0) for _, a in pairs])
    if len(pairs) == 1:
        mu = set_mean(all_names, emb)
    else:
        mu = group_means.mean(axis=0)
    pool_mean = set_mean(pool, emb)
    return float(((group_means - mu) * (attr_means - pool_mean)).sum())


def association_score(group_mean, mu, attr_mean, pool_mean) -> float:
    """Per-pair score sigma = (Xi-bar - mu) . (Aij-bar - pool-bar)."""
    group_mean = np.asarray(group_mean, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    attr_mean = np.asarray(attr_mean, dtype=np.float64)
    pool_mean = np.asarray(pool_mean, dtype=np.float64)
    return float((group_mean - mu) @ (attr_mean - pool_mean))
