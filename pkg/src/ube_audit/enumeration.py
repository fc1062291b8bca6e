"""Association scoring over (name group, word category) cells.

Words are first split per category into "Voronoi" cells — each word joins
the group whose center has the largest inner product with it — then each
cell keeps its t highest-scoring words and earns the score

    sigma[i, j] = (center_i - mu) . (mean of selected words - pool mean).

The null distribution repeats the same computation after rotating only the
name side (centers and mu) by Haar-random orthogonal matrices, which is
algebraically identical to rotating every name vector. Cells with fewer
than t words score -inf so they can never beat an observed (finite) score.

``score_pairs`` and ``compute_null_scores`` share one code path, and a
rotation enters only as ``centers @ U``; feeding the identity therefore
reproduces observed scores bit for bit (multiplying by I adds exact zeros).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, TruncatedFile
from .rotations import haar_rotation, rotation_rng

_CACHE_MAGIC = b"UBENULL1"
_CACHE_HEADER = struct.Struct("<5q")  # n, m, rotations, dim, seed


def voronoi_partition(word_vectors, group_means) -> list[np.ndarray]:
    """Assign each word to the group maximizing word . center.

    Returns one index array per group; exact ties go to the lowest group
    id. Empty cells are legal and come back as empty arrays.
    """
    w = np.asarray(word_vectors, dtype=np.float64)
    c = np.asarray(group_means, dtype=np.float64)
    if w.ndim != 2 or c.ndim != 2 or w.shape[1] != c.shape[1]:
        raise ConfigError("word_vectors and group_means must be 2-d with one "
                          "dimensionality")
    if w.shape[0] == 0:
        raise ConfigError("cannot partition an empty category")
    labels = np.argmax(w @ c.T, axis=1)
    return [np.flatnonzero(labels == i) for i in range(c.shape[0])]


def select_words(word_vectors, group_mean, mu, category_mean, t: int,
                 ranks=None):
    """Pick the t cell words maximizing (center - mu) . (word - category mean).

    Returns ``(order, complete)`` where ``order`` indexes ``word_vectors``
    in descending-score order. Score ties resolve toward the smaller entry
    of ``ranks`` (defaults to input position, i.e. frequency order). Cells
    with fewer than t words return everything and ``complete=False``; such
    pairs are excluded from testing. Subtracting the category mean shifts
    every candidate's score equally, so it never changes the winners — it
    is kept so the scores themselves match their definition.
    """
    w = np.asarray(word_vectors, dtype=np.float64)
    if t < 1:
        raise ConfigError(f"words-per-pair must be positive, got {t}")
    if w.ndim != 2 or w.shape[0] == 0:
        raise ConfigError("cell must be a nonempty 2-d array")
    direction = np.asarray(group_mean, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    scores = (w - np.asarray(category_mean, dtype=np.float64)) @ direction
    if ranks is None:
        ranks = np.arange(w.shape[0])
    else:
        ranks = np.asarray(ranks)
        if ranks.shape != (w.shape[0],):
            raise ConfigError("ranks must supply one entry per word")
    order = np.lexsort((ranks, -scores))
    complete = w.shape[0] >= t
    return (order[:t] if complete else order), complete


@dataclass(frozen=True, eq=False)
class CellScores:
    """Observed per-cell results on the (group, category) grid."""

    sigma: np.ndarray     # (n, m) float64; -inf where the cell is incomplete
    counts: np.ndarray    # (n, m) cell sizes (category sizes with multiplicities)
    selected: np.ndarray  # (n, m, t) pool indices in score order, -1 padded

    @property
    def complete(self) -> np.ndarray:
        return np.isfinite(self.sigma)


@dataclass(frozen=True, eq=False)
class NullScores:
    """Rotational-null score tensor, (n, m, rotations)."""

    scores: np.ndarray
    seed: int
    dim: int

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def m(self) -> int:
        return self.scores.shape[1]

    @property
    def rotations(self) -> int:
        return self.scores.shape[2]


def _check_engine_inputs(pool_vectors, categories, centers, mu, pool_mean,
                         t, n_categories):
    w = np.ascontiguousarray(pool_vectors, dtype=np.float64)
    cats = np.asarray(categories)
    c = np.asarray(centers, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    pm = np.asarray(pool_mean, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] == 0:
        raise ConfigError("pool_vectors must be a nonempty 2-d array")
    if cats.shape != (w.shape[0],):
        raise ConfigError("categories must label every pool word")
    if c.ndim != 2 or c.shape[1] != w.shape[1]:
        raise ConfigError("centers must be 2-d and match the pool dimension")
    if mu.shape != (w.shape[1],) or pm.shape != (w.shape[1],):
        raise ConfigError("mu and pool_mean must be dim-length vectors")
    if t < 1:
        raise ConfigError(f"words-per-pair must be positive, got {t}")
    cats = cats.astype(np.intp)
    if cats.min() < 0:
        raise ConfigError("category ids must be nonnegative")
    m = int(cats.max()) + 1 if n_categories is None else int(n_categories)
    if m <= cats.max():
        raise ConfigError("a category id exceeds the declared count")
    return w, cats, c, mu, pm, m


def _cell_scores(p, q, categories, m, t, pool_term, allow_multiplicities,
                 want_selection):
    """Shared scoring core over precomputed word-center products.

    ``p`` holds word . center per (word, group); ``q`` holds word . mu.
    One stable sort keyed by (cell, descending score) orders each cell's
    words best-first with frequency order breaking exact ties, after which
    per-cell top-t sums fall out of bincount.
    """
    mw, n = p.shape
    if allow_multiplicities:
        values = np.ascontiguousarray((p - q[:, None]).T).ravel()
        buckets = np.repeat(np.arange(n), mw) * m + np.tile(categories, n)
    else:
        labels = np.argmax(p, axis=1)  # ties take the lowest group
        values = p[np.arange(mw), labels] - q
        buckets = labels * m + categories
    order = np.lexsort((-values, buckets))
    sorted_buckets = buckets[order]
    counts = np.bincount(buckets, minlength=n * m)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    within = np.arange(order.shape[0]) - starts[sorted_buckets]
    take = within < t
    sums = np.bincount(sorted_buckets[take], weights=values[order][take],
                       minlength=n * m)
    sigma = sums / t - np.repeat(pool_term, m)
    sigma[counts < t] = -np.inf
    selected = None
    if want_selection:
        selected = np.full((n * m, t), -1, dtype=np.intp)
        picked = order[take]
        if allow_multiplicities:
            picked = picked % mw  # flat index i*mw + w back to the pool word
        selected[sorted_buckets[take], within[take]] = picked
        selected = selected.reshape(n, m, t)
    return sigma.reshape(n, m), counts.reshape(n, m), selected


def _scores_under_rotation(w, cats, centers, mu, pool_mean, t, m, rotation,
                           allow_multiplicities, want_selection):
    if rotation is None:
        rc, rmu = centers, mu
    else:
        rc, rmu = centers @ rotation, mu @ rotation
    block = np.concatenate([rc, rmu[None, :]], axis=0)
    products = w @ block.T
    pool_term = (rc - rmu) @ pool_mean
    return _cell_scores(products[:, :-1], products[:, -1], cats, m, t,
                        pool_term, allow_multiplicities, want_selection)


def score_pairs(pool_vectors, categories, centers, mu, pool_mean, t: int, *,
                rotation=None, allow_multiplicities: bool = False,
                n_categories: int | None = None) -> CellScores:
    """Observed scores, cell sizes, and selected words for every cell.

    ``rotation`` (a d-by-d orthogonal matrix) applies to the name side only
    and exists for diagnostics: the null path uses the same machinery.
    With ``allow_multiplicities`` the Voronoi split is skipped and every
    group ranks the full category, so a word may serve several groups.
    """
    w, cats, c, mu, pm, m = _check_engine_inputs(
        pool_vectors, categories, centers, mu, pool_mean, t, n_categories)
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=np.float64)
        if rotation.shape != (w.shape[1], w.shape[1]):
            raise ConfigError("rotation must be a square matrix of the pool "
                              "dimension")
    sigma, counts, selected = _scores_under_rotation(
        w, cats, c, mu, pm, t, m, rotation, allow_multiplicities, True)
    return CellScores(sigma=sigma, counts=counts, selected=selected)


def compute_null_scores(pool_vectors, categories, centers, mu, pool_mean,
                        t: int, rotations: int, seed: int, *,
                        allow_multiplicities: bool = False,
                        n_categories: int | None = None,
                        progress=None) -> NullScores:
    """Score every cell under ``rotations`` Haar-random name rotations.

    Rotation r's matrix comes from an independent stream keyed by
    (seed, r), so the tensor never depends on evaluation order or on how
    many rotations were requested. ``progress``, if given, is called as
    ``progress(done, total)`` every few hundred rotations.
    """
    w, cats, c, mu, pm, m = _check_engine_inputs(
        pool_vectors, categories, centers, mu, pool_mean, t, n_categories)
    if rotations < 1:
        raise ConfigError(f"rotation count must be positive, got {rotations}")
    n, d = c.shape
    out = np.empty((n, m, rotations), dtype=np.float64)
    for r in range(rotations):
        u = haar_rotation(d, rotation_rng(seed, r))
        sigma, _, _ = _scores_under_rotation(
            w, cats, c, mu, pm, t, m, u, allow_multiplicities, False)
        out[:, :, r] = sigma
        if progress is not None and (r + 1) % 500 == 0:
            progress(r + 1, rotations)
    return NullScores(scores=out, seed=seed, dim=d)


def save_null_scores(path: str | Path, nulls: NullScores) -> None:
    """Write the tensor to a cache file.

    Layout: an 8-byte magic, five little-endian int64 header fields
    (n, m, rotations, dim, seed), then the scores as little-endian float64
    in (group, category, rotation) order.
    """
    scores = np.asarray(nulls.scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ConfigError("null scores must be a 3-d tensor")
    if not 0 <= nulls.seed < 2 ** 63:
        raise ConfigError(f"seed {nulls.seed} does not fit the cache header")
    n, m, rotations = scores.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(_CACHE_HEADER.pack(n, m, rotations, nulls.dim, nulls.seed))
        fh.write(np.ascontiguousarray(scores, dtype="<f8").tobytes())


def load_null_scores(path: str | Path) -> NullScores:
    """Read a cache written by :func:`save_null_scores` (strictly)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise FormatError(f"{path}: not a null-score cache")
        header = fh.read(_CACHE_HEADER.size)
        if len(header) < _CACHE_HEADER.size:
            raise TruncatedFile(f"{path}: header cut short",
                                byte_offset=len(_CACHE_MAGIC) + len(header))
        n, m, rotations, dim, seed = _CACHE_HEADER.unpack(header)
        if min(n, m, rotations, dim) <= 0 or seed < 0:
            raise FormatError(
                f"{path}: implausible header n={n} m={m} R={rotations} "
                f"d={dim} seed={seed}")
        want = n * m * rotations * 8
        data = fh.read(want)
        if len(data) < want:
            raise TruncatedFile(
                f"{path}: score payload cut short",
                byte_offset=len(_CACHE_MAGIC) + _CACHE_HEADER.size + len(data))
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after the payload")
    scores = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return NullScores(scores=scores.reshape(n, m, rotations),
                      seed=int(seed), dim=int(dim))
