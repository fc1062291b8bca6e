"""End-to-end bias audit: cluster, score, test, and assemble the report.

``UbeAuditor`` wires the pieces together in the published order: restrict
and optionally clean the name list, pick the frequent-word pool, cluster
names into groups and pool words into categories, score every (group,
category) cell against its rotational null, select significant cells by
Benjamini-Hochberg over all complete cells jointly, and count potential
indirect biases among the significant ones.
"""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .clustering import kmeans_pp
from .embedding import UnitEmbedding, frequent_lowercase_words
from .enumeration import (compute_null_scores, load_null_scores,
                          save_null_scores, score_pairs)
from .errors import ConfigError
from .names import (NameRecord, NameTable, clean_names, demographic_summary,
                    restrict_to_vocabulary)
from .proxy import iter_fourtuples
from .report import (SCHEMA_VERSION, AuditReport, GroupSummary, PairResult,
                     TestResult, illustrative_names)
from .rotations import derive_seed
from .significance import benjamini_hochberg, monte_carlo_pvalue

log = logging.getLogger(__name__)

_LABEL_PREFIX = {"ssa": "F", "census": "L"}


def _as_table(names) -> NameTable:
    """Wrap a plain iterable of name strings, deduplicating in order."""
    if isinstance(names, NameTable):
        return names
    records: list[NameRecord] = []
    seen: set[str] = set()
    for name in names:
        if not isinstance(name, str):
            raise ConfigError(
                f"names must be strings, got {type(name).__name__}")
        if name in seen:
            continue
        seen.add(name)
        records.append(NameRecord(name=name, total_count=0))
    return NameTable(records=tuple(records), source="plain")


class UbeAuditor(BaseEstimator):
    """Unsupervised enumeration of significant name/word associations.

    Parameters mirror the pipeline stages: ``n_groups`` name clusters and
    ``n_categories`` word clusters over the ``pool_size`` most frequent
    lowercase words; each complete cell contributes its top
    ``words_per_pair`` words and is tested against ``rotations``
    random rotations of the name side; Benjamini-Hochberg runs at level
    ``alpha`` over all complete cells jointly.

    ``clean_method`` (``margin``, ``mean_similarity``, or None) controls
    removal of the least name-like ``removal_fraction`` of the input
    names before clustering. ``allow_multiplicities`` scores every
    category against every group instead of partitioning each category
    among the groups.

    After ``fit`` the fitted state is exposed with trailing-underscore
    attributes (``report_``, ``cells_``, ``pvalues_``, ``significant_``,
    ``fourtuples_``, ...).
    """

    def __init__(self, n_groups: int = 12, n_categories: int = 64,
                 pool_size: int = 30000, words_per_pair: int = 3,
                 alpha: float = 0.05, rotations: int = 10000, seed: int = 0,
                 allow_multiplicities: bool = False,
                 clean_method: str | None = "margin",
                 removal_fraction: float = 0.2, negatives_pool: int = 50000,
                 kmeans_n_init: int = 10, kmeans_max_iter: int = 300,
                 illustrative_count: int = 5,
                 illustrative_normalized: bool = False,
                 underscore_as_space: bool = True):
        self.n_groups = n_groups
        self.n_categories = n_categories
        self.pool_size = pool_size
        self.words_per_pair = words_per_pair
        self.alpha = alpha
        self.rotations = rotations
        self.seed = seed
        self.allow_multiplicities = allow_multiplicities
        self.clean_method = clean_method
        self.removal_fraction = removal_fraction
        self.negatives_pool = negatives_pool
        self.kmeans_n_init = kmeans_n_init
        self.kmeans_max_iter = kmeans_max_iter
        self.illustrative_count = illustrative_count
        self.illustrative_normalized = illustrative_normalized
        self.underscore_as_space = underscore_as_space

    def _validate(self) -> None:
        for attr in ("n_groups", "n_categories", "pool_size",
                     "words_per_pair", "rotations", "illustrative_count"):
            if getattr(self, attr) < 1:
                raise ConfigError(
                    f"{attr} must be positive, got {getattr(self, attr)!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0 <= self.seed < 2 ** 63:
            raise ConfigError(f"seed must lie in [0, 2^63), got {self.seed!r}")
        if self.clean_method not in (None, "margin", "mean_similarity"):
            raise ConfigError(
                f"clean_method must be margin|mean_similarity|None, "
                f"got {self.clean_method!r}")
        if not 0.0 <= self.removal_fraction < 1.0:
            raise ConfigError(
                f"removal_fraction must lie in [0, 1), "
                f"got {self.removal_fraction!r}")

    # ------------------------------------------------------------- stages

    def _cleaned_names(self, table: NameTable,
                       embedding: UnitEmbedding) -> NameTable:
        if self.clean_method is None:
            return table
        return clean_names(table, embedding,
                           removal_fraction=self.removal_fraction,
                           method=self.clean_method,
                           negatives_pool=self.negatives_pool,
                           seed=self.seed)

    def _null_scores(self, w, null_cache):
        if null_cache is not None and Path(null_cache).exists():
            nulls = load_null_scores(null_cache)
            mismatched = [
                f"{key}: cache has {have}, run wants {want}"
                for key, have, want in (
                    ("groups", nulls.n, self.n_groups),
                    ("categories", nulls.m, self.n_categories),
                    ("rotations", nulls.rotations, self.rotations),
                    ("dim", nulls.dim, w.shape[1]),
                    ("seed", nulls.seed, self.seed))
                if have != want]
            if mismatched:
                raise ConfigError("null cache does not match this run -- "
                                  + "; ".join(mismatched))
            log.info("nulls.cache hit path=%s", null_cache)
            return nulls
        nulls = compute_null_scores(
            w, self.word_clusters_.labels, self.centers_, self.mu_,
            self.pool_.pool_mean, self.words_per_pair, self.rotations,
            self.seed, allow_multiplicities=self.allow_multiplicities,
            n_categories=self.n_categories,
            progress=lambda done, total: log.info(
                "nulls.progress %d/%d", done, total))
        if null_cache is not None:
            save_null_scores(null_cache, nulls)
            log.info("nulls.cache saved path=%s", null_cache)
        return nulls

    def _group_summaries(self, embedding: UnitEmbedding):
        members = {i: [self.names_[k] for k in self.name_clusters_.members(i)]
                   for i in range(self.n_groups)}
        stats = {i: demographic_summary(members[i], self.table_)
                 for i in members}
        order = list(range(self.n_groups))
        if all(stats[i].fraction_female is not None for i in order):
            order.sort(key=lambda i: (-stats[i].fraction_female, i))
        prefix = _LABEL_PREFIX.get(self.table_.source, "G")
        groups = []
        for pos, i in enumerate(order, start=1):
            shown = illustrative_names(
                members[i], embedding,
                min(self.illustrative_count, len(members[i])),
                normalized=self.illustrative_normalized)
            groups.append(GroupSummary(
                group_id=i, label=f"{prefix}{pos}", size=len(members[i]),
                illustrative=shown, residual=len(members[i]) - len(shown),
                stats=stats[i]))
        return tuple(groups)

    def _test_results(self, p: np.ndarray):
        cells = self.cells_
        complete = cells.complete
        significant = self.significant_
        totals = np.where(significant, np.where(complete, cells.sigma, 0.0),
                          0.0).sum(axis=0)
        sig_counts = significant.sum(axis=0)
        # Categories with any significant pair first, by descending total;
        # silent categories keep id order at the tail.
        ranked = sorted(range(self.n_categories),
                        key=lambda j: (sig_counts[j] == 0, -totals[j], j))
        tests = []
        for rank, j in enumerate(ranked, start=1):
            pairs = []
            for i in range(self.n_groups):
                if complete[i, j]:
                    pairs.append(PairResult(
                        group_id=i, complete=True,
                        pool_count=int(cells.counts[i, j]),
                        words=tuple(self.pool_.words[k]
                                    for k in cells.selected[i, j]),
                        sigma=float(cells.sigma[i, j]),
                        pvalue=float(p[i, j]),
                        significant=bool(significant[i, j])))
                else:
                    pairs.append(PairResult(
                        group_id=i, complete=False,
                        pool_count=int(cells.counts[i, j]), words=None,
                        sigma=None, pvalue=None, significant=False))
            tests.append(TestResult(
                category_id=j, rank=rank,
                total_significant_score=float(totals[j]),
                significant_count=int(sig_counts[j]), pairs=tuple(pairs)))
        return tuple(tests)

    # ---------------------------------------------------------------- fit

    def fit(self, embedding: UnitEmbedding, names, *,
            null_cache=None) -> "UbeAuditor":
        """Run the audit; ``names`` is a NameTable or an iterable of strings.

        ``null_cache`` optionally points at a file of per-cell null scores:
        loaded when present (and checked against this run's shape, rotation
        count, and seed), written after computing otherwise.
        """
        t0 = time.perf_counter()
        self._validate()
        if not isinstance(embedding, UnitEmbedding):
            raise ConfigError("embedding must be a UnitEmbedding")
        table = _as_table(names)
        if len(table) == 0:
            raise ConfigError("the name list is empty")
        table, dropped = restrict_to_vocabulary(table, embedding)
        if len(table) == 0:
            raise ConfigError("no name is in the embedding vocabulary")
        self.table_ = table
        self.dropped_names_ = tuple(dropped)
        kept = self._cleaned_names(table, embedding)
        kept_set = set(kept.names)
        self.removed_names_ = tuple(n for n in table.names
                                    if n not in kept_set)
        self.names_ = kept.names
        log.info("audit.names kept=%d removed=%d dropped=%d",
                 len(self.names_), len(self.removed_names_),
                 len(self.dropped_names_))

        self.pool_ = frequent_lowercase_words(
            embedding, self.pool_size, self.underscore_as_space)

        x = embedding.rows(self.names_)
        self.name_clusters_ = kmeans_pp(
            x, self.n_groups, derive_seed(self.seed, "name-groups"),
            max_iter=self.kmeans_max_iter, n_init=self.kmeans_n_init)
        w = embedding.vectors[self.pool_.indices].astype(np.float64)
        self.word_clusters_ = kmeans_pp(
            w, self.n_categories, derive_seed(self.seed, "word-categories"),
            max_iter=self.kmeans_max_iter, n_init=self.kmeans_n_init)
        log.info("audit.clusters name_inertia=%.6g word_inertia=%.6g",
                 self.name_clusters_.inertia, self.word_clusters_.inertia)

        centers = np.empty((self.n_groups, embedding.dim))
        for i in range(self.n_groups):
            rows = self.name_clusters_.members(i)
            if rows.size == 0:
                raise ConfigError(f"name group {i} is empty")
            centers[i] = x[rows].mean(axis=0)
        self.centers_ = centers
        # With a single group the baseline is the mean over all names.
        self.mu_ = centers.mean(axis=0) if self.n_groups >= 2 \
            else x.mean(axis=0)

        self.cells_ = score_pairs(
            w, self.word_clusters_.labels, centers, self.mu_,
            self.pool_.pool_mean, self.words_per_pair,
            allow_multiplicities=self.allow_multiplicities,
            n_categories=self.n_categories)
        self.null_scores_ = self._null_scores(w, null_cache)

        complete = self.cells_.complete
        cell_index = np.argwhere(complete)
        p = np.full((self.n_groups, self.n_categories), np.nan)
        flat = []
        for i, j in cell_index:
            flat.append(monte_carlo_pvalue(
                self.cells_.sigma[i, j], self.null_scores_.scores[i, j]))
            p[i, j] = flat[-1]
        reject, self.critical_p_ = benjamini_hochberg(flat, self.alpha)
        significant = np.zeros_like(complete)
        for (i, j), hit in zip(cell_index, reject):
            significant[i, j] = hit
        self.pvalues_ = p
        self.significant_ = significant
        log.info("audit.significant pairs=%d of=%d critical_p=%.6g",
                 int(significant.sum()), len(flat), self.critical_p_)

        means = np.full((self.n_groups, self.n_categories, embedding.dim),
                        np.nan)
        for i, j in cell_index:
            means[i, j] = w[self.cells_.selected[i, j]].mean(axis=0)
        self.pair_means_ = means
        self.fourtuples_ = tuple(iter_fourtuples(means, significant))
        positive = sum(ft.potential for ft in self.fourtuples_)

        groups = self._group_summaries(embedding)
        tests = self._test_results(p)
        self.fit_seconds_ = time.perf_counter() - t0
        self.report_ = AuditReport(
            schema_version=SCHEMA_VERSION, config=self.get_params(),
            seed=self.seed, embedding_fingerprint=embedding.fingerprint,
            alpha=self.alpha, critical_p=self.critical_p_, groups=groups,
            tests=tests, fourtuples_total=len(self.fourtuples_),
            fourtuples_positive=int(positive),
            fourtuples_fraction=positive / len(self.fourtuples_)
            if self.fourtuples_ else None,
            wall_seconds=self.fit_seconds_)
        return self


def run_audit(embedding: UnitEmbedding, names, *, null_cache=None,
              **params) -> UbeAuditor:
    """Construct, fit, and return a ``UbeAuditor`` in one call."""
    return UbeAuditor(**params).fit(embedding, names, null_cache=null_cache)
