"""K-means++ with the determinism guarantees the pipeline needs.

Differences from a stock implementation, all load-bearing downstream:

* points are processed in a content-canonical order (a byte-wise sort of
  the rows), so the partition is invariant to input permutation for a
  fixed seed;
* D-squared seeding draws from a named seeded stream per restart;
* assignment ties go to the lowest cluster id;
* empty clusters are repaired by donating the point farthest from its
  current center (never emptying a singleton), which strictly lowers
  inertia, so the per-iteration trace stays non-increasing;
* the best of ``n_init`` restarts is chosen by (inertia, restart index).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import ConfigError
from .rotations import seeded_rng


@dataclass(frozen=True, eq=False)
class Clustering:
    labels: np.ndarray  # (N,) ints in [0, k)
    centers: np.ndarray  # (k, d) float64, row g is the mean of cluster g
    inertia: float
    inertia_trace: tuple[float, ...]
    n_iter: int

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)


def nearest_center(vectors, centers) -> np.ndarray:
    """Index of the closest center per row; ties break to the lowest id."""
    x = np.asarray(vectors, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    d = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ c.T) + (c * c).sum(axis=1)[None, :]
    return np.argmin(d, axis=1)


def _canonical_order(x: np.ndarray) -> np.ndarray:
    """Byte-lexicographic row order: a content-keyed, permutation-proof sort."""
    as_void = np.ascontiguousarray(x).view(
        np.dtype((np.void, x.dtype.itemsize * x.shape[1])))
    return np.argsort(as_void.ravel(), kind="stable")


def _dsquared_seed(xs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = xs.shape[0]
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = rng.integers(n)
    d2 = ((xs - xs[chosen[0]]) ** 2).sum(axis=1)
    d2[chosen[0]] = 0.0
    for c in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            # Every remaining point coincides with a chosen center.
            mask = np.ones(n, dtype=bool)
            mask[chosen[:c]] = False
            idx = int(np.flatnonzero(mask)[0])
        chosen[c] = idx
        d2 = np.minimum(d2, ((xs - xs[idx]) ** 2).sum(axis=1))
        d2[idx] = 0.0
    return chosen


def _means_by_label(xs: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=k)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    sums = np.add.reduceat(xs[order], starts, axis=0)
    return sums / counts[:, None]


def _lloyd(xs: np.ndarray, centers: np.ndarray, max_iter: int):
    n, _ = xs.shape
    k = centers.shape[0]
    x_sq = (xs * xs).sum(axis=1)
    prev = None
    trace: list[float] = []
    for _ in range(max_iter):
        dists = x_sq[:, None] - 2.0 * (xs @ centers.T) + (centers * centers).sum(axis=1)
        labels = np.argmin(dists, axis=1)
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            point_d = dists[np.arange(n), labels]
            donors = np.argsort(-point_d, kind="stable")
            di = 0
            for e in empties:
                while di < n and counts[labels[donors[di]]] <= 1:
                    di += 1
                if di >= n:  # k <= n makes this unreachable
                    raise RuntimeError("cannot repair empty cluster")
                donor = donors[di]
                counts[labels[donor]] -= 1
                labels[donor] = e
                counts[e] = 1
                di += 1
        if prev is not None and np.array_equal(labels, prev):
            break
        centers = _means_by_label(xs, labels, k)
        trace.append(float(((xs - centers[labels]) ** 2).sum()))
        prev = labels
    return prev, centers, trace


def kmeans_pp(vectors, k: int, seed: int, max_iter: int = 300,
              n_init: int = 10) -> Clustering:
    """Cluster rows of ``vectors`` into k groups; see the module docstring."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigError("vectors must be a nonempty 2-d array")
    if not np.all(np.isfinite(x)):
        raise ConfigError("vectors must be finite")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in [1, {n}], got {k}")
    if max_iter < 1 or n_init < 1:
        raise ConfigError("max_iter and n_init must be positive")
    order = _canonical_order(x)
    xs = x[order]
    best = None
    for restart in range(n_init):
        rng = seeded_rng(seed, "kmeans-init", restart)
        labels_s, centers, trace = _lloyd(xs, xs[_dsquared_seed(xs, k, rng)], max_iter)
        inertia = trace[-1]
        if best is None or inertia < best[0]:
            best = (inertia, restart, labels_s, centers, trace)
    inertia, _, labels_s, centers, trace = best
    labels = np.empty(n, dtype=np.intp)
    labels[order] = labels_s
    return Clustering(labels=labels, centers=centers, inertia=float(inertia),
                      inertia_trace=tuple(trace), n_iter=len(trace))


class KMeansPP(ClusterMixin, BaseEstimator):
    """Estimator wrapper around :func:`kmeans_pp`.

    Parameters mirror the functional form; ``random_state`` is a
    nonnegative int (this implementation does not accept RandomState
    objects, reproducibility is stream-based).
    """

    def __init__(self, n_clusters=8, *, n_init=10, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        result = kmeans_pp(X, self.n_clusters, seed=self.random_state,
                           max_iter=self.max_iter, n_init=self.n_init)
        self.labels_ = result.labels
        self.cluster_centers_ = result.centers
        self.inertia_ = result.inertia
        self.inertia_trace_ = result.inertia_trace
        self.n_iter_ = result.n_iter
        return self

    def predict(self, X):
        if not hasattr(self, "cluster_centers_"):
            raise ConfigError("KMeansPP.predict called before fit")
        return nearest_center(X, self.cluster_centers_)


def write_assignments_csv(path: str | Path, tokens, labels) -> None:
    """Dump (token, cluster_id) rows for external auditing."""
    labels = np.asarray(labels)
    tokens = list(tokens)
    if len(tokens) != labels.shape[0]:
        raise ConfigError("tokens and labels disagree")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["token", "cluster_id"])
        for tok, lab in zip(tokens, labels):
            writer.writerow([tok, int(lab)])
