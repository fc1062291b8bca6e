"""Name datasets: SSA first names, Census surnames, cleaning, group stats.

Both ingesters produce a :class:`NameTable` whose record order is
first-appearance order (deterministic for a fixed directory). Demographic
fields are a-posteriori only: nothing downstream of cleaning ever reads
them, they exist to describe discovered groups after the fact.
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.svm import LinearSVC

from .embedding import UnitEmbedding
from .errors import ConfigError, IngestError
from .rotations import derive_seed, seeded_rng

log = logging.getLogger(__name__)

_SSA_FILE = re.compile(r"yob(\d{4})\.txt$")

# Census column -> race key used throughout reports.
_RACE_COLUMNS = {
    "pctwhite": "white",
    "pctblack": "black",
    "pctapi": "asian_pacific",
    "pctaian": "native",
    "pcthispanic": "hispanic",
}

RACE_KEYS = ("black", "hispanic", "asian_pacific", "white", "native")


@dataclass(frozen=True)
class NameRecord:
    name: str
    total_count: int
    fraction_female: float | None = None
    mean_birth_year: float | None = None
    race_pcts: dict[str, float] | None = None


@dataclass(eq=False)
class NameTable:
    records: tuple[NameRecord, ...]
    source: str
    skipped_lines: int = 0
    _index: dict | None = field(default=None, repr=False)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.records)

    def record(self, name: str) -> NameRecord:
        if self._index is None:
            self._index = {r.name: r for r in self.records}
        return self._index[name]

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class GroupStats:
    """Per-group unweighted means over the names that carry each field."""

    size: int
    fraction_female: float | None
    mean_birth_year: float | None
    race_pcts: dict[str, float]


def ingest_ssa(directory: str | Path, year_min: int = 1938, year_max: int = 2017,
               min_count: int = 1000) -> NameTable:
    """Aggregate SSA yobYYYY.txt files ("name,sex,count" lines).

    Counts are summed over both sexes and all years in [year_min, year_max];
    names below ``min_count`` total are dropped. fraction_female is
    female/total and mean_birth_year is the count-weighted mean year.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"not a directory: {directory}")
    paths = []
    for p in sorted(directory.glob("yob*.txt")):
        m = _SSA_FILE.search(p.name)
        if m and year_min <= int(m.group(1)) <= year_max:
            paths.append((int(m.group(1)), p))
    if not paths:
        raise IngestError(f"no yobYYYY.txt files in [{year_min}, {year_max}] under {directory}")
    total: dict[str, int] = {}
    female: dict[str, int] = {}
    year_sum: dict[str, float] = {}
    skipped = 0
    for year, path in paths:
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IngestError(f"cannot read {path}: {exc}") from exc
        for line in lines:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 3 or parts[1] not in ("F", "M") or not parts[0]:
                skipped += 1
                continue
            try:
                count = int(parts[2])
            except ValueError:
                skipped += 1
                continue
            if count < 0:
                skipped += 1
                continue
            name = parts[0]
            total[name] = total.get(name, 0) + count
            year_sum[name] = year_sum.get(name, 0.0) + year * count
            if parts[1] == "F":
                female[name] = female.get(name, 0) + count
    records = tuple(
        NameRecord(
            name=name,
            total_count=count,
            fraction_female=female.get(name, 0) / count,
            mean_birth_year=year_sum[name] / count,
        )
        for name, count in total.items() if count >= min_count
    )
    log.info("names.ingest source=ssa files=%d kept=%d skipped_lines=%d",
             len(paths), len(records), skipped)
    return NameTable(records=records, source="ssa", skipped_lines=skipped)


def ingest_census_surnames(path: str | Path, min_count: int = 1000,
                           case: str = "title") -> NameTable:
    """Load the Census surname CSV (name, count, pct* race columns).

    Suppressed percentages (any non-numeric placeholder such as "(S)")
    are recorded as absent. ``case`` recases names to match embedding
    conventions: title|lower|upper|keep.
    """
    if case not in ("title", "lower", "upper", "keep"):
        raise ConfigError(f"case must be title|lower|upper|keep, got {case!r}")
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    records = []
    skipped = 0
    seen: set[str] = set()
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        columns = {name.strip().lower(): name for name in reader.fieldnames}
        if "name" not in columns or "count" not in columns:
            raise IngestError(f"{path}: need 'name' and 'count' columns, "
                              f"found {sorted(columns)}")
        for row in reader:
            raw_name = (row.get(columns["name"]) or "").strip()
            try:
                count = int(row.get(columns["count"], ""))
            except ValueError:
                skipped += 1
                continue
            if not raw_name or count < min_count:
                if not raw_name:
                    skipped += 1
                continue
            if case == "title":
                name = raw_name.title()
            elif case == "lower":
                name = raw_name.lower()
            elif case == "upper":
                name = raw_name.upper()
            else:
                name = raw_name
            if name in seen:
                skipped += 1
                continue
            seen.add(name)
            pcts: dict[str, float] = {}
            for col, key in _RACE_COLUMNS.items():
                if col not in columns:
                    continue
                try:
                    pcts[key] = float(row.get(columns[col], ""))
                except ValueError:
                    pass  # suppressed, e.g. "(S)"
            records.append(NameRecord(name=name, total_count=count, race_pcts=pcts))
    log.info("names.ingest source=census kept=%d skipped_lines=%d", len(records), skipped)
    return NameTable(records=tuple(records), source="census", skipped_lines=skipped)


def restrict_to_vocabulary(table: NameTable, emb: UnitEmbedding):
    """Drop names missing from the embedding; returns (table, dropped_names)."""
    kept = tuple(r for r in table.records if r.name in emb)
    dropped = tuple(r.name for r in table.records if r.name not in emb)
    if dropped:
        log.warning("names.vocab kept=%d dropped=%d", len(kept), len(dropped))
    out = NameTable(records=kept, source=table.source, skipped_lines=table.skipped_lines)
    return out, dropped


def clean_names(table: NameTable, emb: UnitEmbedding, removal_fraction: float = 0.2,
                method: str = "margin", negatives_pool: int = 50000,
                seed: int = 0) -> NameTable:
    """Remove the least name-like fraction of the table.

    ``margin`` trains a linear SVM (L2-regularized hinge loss, C=1.0,
    tol=1e-4) to separate the names from an equally sized seeded sample of
    frequent non-name tokens, then drops the ceil(fraction * N) names with
    the smallest signed margin. ``mean_similarity`` instead drops the names
    whose mean cosine to the other names is smallest. Names absent from the
    embedding vocabulary are dropped first, with a warning.
    """
    if not 0.0 <= removal_fraction < 1.0:
        raise ConfigError(
            f"removal_fraction must lie in [0, 1), got {removal_fraction!r}")
    if method not in ("margin", "mean_similarity"):
        raise ConfigError(f"method must be margin|mean_similarity, got {method!r}")
    table, _ = restrict_to_vocabulary(table, emb)
    n = len(table.records)
    k = math.ceil(removal_fraction * n)
    if k == 0 or n == 0:
        return table
    names = table.names
    x = emb.rows(names)
    if method == "margin":
        scores = _margin_scores(names, x, emb, negatives_pool, seed)
    else:
        scores = _mean_similarity_scores(x)
    # Smallest score goes first; ties resolve by table order.
    order = np.lexsort((np.arange(n), scores))
    removed = set(order[:k])
    kept = tuple(r for i, r in enumerate(table.records) if i not in removed)
    log.info("names.clean method=%s removed=%d kept=%d", method, k, len(kept))
    return NameTable(records=kept, source=table.source, skipped_lines=table.skipped_lines)


def _margin_scores(names, x: np.ndarray, emb: UnitEmbedding,
                   negatives_pool: int, seed: int) -> np.ndarray:
    name_set = set(names)
    limit = min(negatives_pool, len(emb))
    candidates = np.asarray(
        [i for i in range(limit) if emb.tokens[i] not in name_set], dtype=np.intp)
    if candidates.size == 0:
        raise ConfigError("no non-name tokens available for negative sampling")
    rng = seeded_rng(seed, "clean-negatives")
    n = x.shape[0]
    if candidates.size >= n:
        chosen = rng.choice(candidates, size=n, replace=False)
    else:
        log.warning("names.clean negatives=%d < names=%d, sampling with replacement",
                    candidates.size, n)
        chosen = rng.choice(candidates, size=n, replace=True)
    negatives = emb.vectors[chosen].astype(np.float64)
    features = np.vstack([x, negatives])
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    clf = LinearSVC(C=1.0, tol=1e-4, max_iter=20000,
                    random_state=derive_seed(seed, "clean-svm"))
    clf.fit(features, labels)
    return clf.decision_function(x)


def _mean_similarity_scores(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    if n == 1:
        return np.zeros(1)
    return (x @ x.sum(axis=0) - 1.0) / (n - 1)


def demographic_summary(group, table: NameTable) -> GroupStats:
    """Unweighted means of the demographic fields over a group of names."""
    group = list(group)
    if not group:
        raise ConfigError("demographic summary of an empty group")
    try:
        records = [table.record(name) for name in group]
    except KeyError as exc:
        raise ConfigError(f"name not in table: {exc.args[0]!r}") from None
    ff = [r.fraction_female for r in records if r.fraction_female is not None]
    yr = [r.mean_birth_year for r in records if r.mean_birth_year is not None]
    race: dict[str, float] = {}
    for key in RACE_KEYS:
        vals = [r.race_pcts[key] for r in records
                if r.race_pcts is not None and key in r.race_pcts]
        if vals:
            race[key] = float(np.mean(vals))
    return GroupStats(
        size=len(records),
        fraction_female=float(np.mean(ff)) if ff else None,
        mean_birth_year=float(np.mean(yr)) if yr else None,
        race_pcts=race,
    )
