"""Audit-report assembly and rendering.

The report is a plain value object; rendering is a pure function of it, so
a report parsed back from its JSON form re-renders byte-identically. Wall
time deliberately never enters any rendered byte — runs with equal inputs
must produce equal files — and lives only on the in-memory object.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .names import RACE_KEYS, GroupStats, NameTable
from .embedding import UnitEmbedding

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GroupSummary:
    """One name group as presented: label, members summary, demographics."""

    group_id: int
    label: str
    size: int
    illustrative: tuple[str, ...]
    residual: int
    stats: GroupStats | None


@dataclass(frozen=True)
class PairResult:
    """One (group, category) cell. Incomplete cells carry None fields."""

    group_id: int
    complete: bool
    pool_count: int
    words: tuple[str, ...] | None
    sigma: float | None
    pvalue: float | None
    significant: bool


@dataclass(frozen=True)
class TestResult:
    """One category's test over all groups, with its rank in the report."""

    __test__ = False  # not a pytest case, despite the name

    category_id: int
    rank: int
    total_significant_score: float
    significant_count: int
    pairs: tuple[PairResult, ...]


@dataclass(frozen=True)
class AuditReport:
    schema_version: int
    config: dict
    seed: int
    embedding_fingerprint: str
    alpha: float
    critical_p: float
    groups: tuple[GroupSummary, ...]   # presentation order
    tests: tuple[TestResult, ...]      # rank order
    fourtuples_total: int
    fourtuples_positive: int
    fourtuples_fraction: float | None
    wall_seconds: float | None = None  # in-memory only, never rendered


# ------------------------------------------------------- illustrative names

def illustrative_names(tokens, emb: UnitEmbedding, k: int, *,
                       normalized: bool = False) -> tuple[str, ...]:
    """Greedy representative subset of a name group.

    Each step adds the name maximizing the inner product of the running
    mean of chosen names with the group mean; because that shift is shared
    by all candidates, the default form reduces to ranking by similarity to
    the group mean. ``normalized`` instead maximizes the cosine of the
    running mean, which genuinely depends on earlier picks. Ties go to the
    more frequent name. Asking for more names than the group holds returns
    the whole group with a warning.
    """
    tokens = list(tokens)
    if not tokens:
        raise ConfigError("cannot pick illustrative names from an empty group")
    if k < 1:
        raise ConfigError(f"illustrative count must be positive, got {k}")
    if k > len(tokens):
        log.warning("illustrative.k_exceeds group=%d k=%d", len(tokens), k)
        k = len(tokens)
    # Frequency order makes argmax's first-max rule the rank tie-break.
    pool = sorted(tokens, key=emb.rank)
    vectors = emb.rows(pool)
    target = vectors.mean(axis=0)
    target_norm = max(float(np.linalg.norm(target)), 1e-300)
    chosen: list[int] = []
    running = np.zeros(vectors.shape[1])
    available = np.ones(len(pool), dtype=bool)
    for _ in range(k):
        stacked = running + vectors
        scores = stacked @ target
        if normalized:
            norms = np.maximum(np.linalg.norm(stacked, axis=1), 1e-300)
            scores = scores / (norms * target_norm)
        scores[~available] = -np.inf
        best = int(np.argmax(scores))
        chosen.append(best)
        available[best] = False
        running = running + vectors[best]
    return tuple(pool[i] for i in chosen)


# ---------------------------------------------------------------- rendering

def _masked(word: str, mask) -> str:
    if mask and word in mask:
        return word[0] + "*" * (len(word) - 1)
    return word


def _stats_payload(stats: GroupStats | None):
    if stats is None:
        return None
    return {
        "size": stats.size,
        "fraction_female": stats.fraction_female,
        "mean_birth_year": stats.mean_birth_year,
        "race_pcts": dict(stats.race_pcts),
    }


def _json_payload(report: AuditReport, mask) -> dict:
    return {
        "schema_version": report.schema_version,
        "config": report.config,
        "seed": report.seed,
        "embedding_fingerprint": report.embedding_fingerprint,
        "alpha": report.alpha,
        "critical_p": report.critical_p,
        "groups": [
            {
                "group_id": g.group_id,
                "label": g.label,
                "size": g.size,
                "illustrative": list(g.illustrative),
                "residual": g.residual,
                "stats": _stats_payload(g.stats),
            }
            for g in report.groups
        ],
        "tests": [
            {
                "category_id": t.category_id,
                "rank": t.rank,
                "total_significant_score": t.total_significant_score,
                "significant_count": t.significant_count,
                "pairs": [
                    {
                        "group_id": p.group_id,
                        "complete": p.complete,
                        "pool_count": p.pool_count,
                        "words": None if p.words is None
                        else [_masked(w, mask) for w in p.words],
                        "sigma": p.sigma,
                        "pvalue": p.pvalue,
                        "significant": p.significant,
                    }
                    for p in t.pairs
                ],
            }
            for t in report.tests
        ],
        "fourtuples": {
            "total": report.fourtuples_total,
            "positive": report.fourtuples_positive,
            "fraction": report.fourtuples_fraction,
        },
    }


def _csv_bytes(report: AuditReport, mask) -> bytes:
    labels = {g.group_id: g.label for g in report.groups}
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["rank", "category_id", "group_id", "group_label",
                     "words", "sigma", "pvalue", "significant"])
    for test in report.tests:
        for pair in test.pairs:
            if not pair.complete:
                continue
            writer.writerow([
                test.rank, test.category_id, pair.group_id,
                labels.get(pair.group_id, ""),
                "|".join(_masked(w, mask) for w in pair.words),
                repr(float(pair.sigma)), repr(float(pair.pvalue)),
                "true" if pair.significant else "false",
            ])
    return out.getvalue().encode("utf-8")


def _markdown_bytes(report: AuditReport, mask) -> bytes:
    lines = ["# Embedding bias audit", ""]
    if mask:
        lines.append("> Words from the mask list are shown as their first "
                     "letter plus asterisks.")
    else:
        lines.append("> Word lists are rendered unmasked and may contain "
                     "offensive terms.")
    lines.append("")
    complete = sum(1 for t in report.tests for p in t.pairs if p.complete)
    significant = sum(t.significant_count for t in report.tests)
    if report.fourtuples_total:
        fourtuples = (f"{report.fourtuples_positive}/{report.fourtuples_total}"
                      f" ({100.0 * report.fourtuples_fraction:.1f}%)")
    else:
        fourtuples = "none"
    lines += ["| run | value |", "|---|---|",
              f"| embedding | `{report.embedding_fingerprint}` |",
              f"| seed | {report.seed} |",
              f"| alpha | {report.alpha:g} |",
              f"| critical p | {report.critical_p:.6g} |",
              f"| complete pairs | {complete} |",
              f"| significant pairs | {significant} |",
              f"| potential indirect biases | {fourtuples} |", ""]

    lines.append("## Name groups")
    lines.append("")
    any_female = any(g.stats and g.stats.fraction_female is not None
                     for g in report.groups)
    any_year = any(g.stats and g.stats.mean_birth_year is not None
                   for g in report.groups)
    race_cols = [key for key in RACE_KEYS
                 if any(g.stats and key in g.stats.race_pcts
                        for g in report.groups)]
    header = ["group", "size"]
    header += ["%F"] if any_female else []
    header += ["birth year"] if any_year else []
    header += [f"%{key}" for key in race_cols]
    header.append("illustrative names")
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for g in report.groups:
        row = [g.label, str(g.size)]
        stats = g.stats
        if any_female:
            row.append("" if stats is None or stats.fraction_female is None
                       else f"{100.0 * stats.fraction_female:.1f}%")
        if any_year:
            row.append("" if stats is None or stats.mean_birth_year is None
                       else f"{stats.mean_birth_year:.1f}")
        for key in race_cols:
            row.append(f"{stats.race_pcts[key]:.1f}"
                       if stats and key in stats.race_pcts else "")
        shown = ", ".join(g.illustrative)
        if g.residual > 0:
            shown += f" (+{g.residual} more)"
        row.append(shown)
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    ranked = [t for t in report.tests if t.significant_count > 0]
    if not ranked:
        lines.append(f"There are no significant associations at "
                     f"alpha={report.alpha:g}.")
        lines.append("")
    else:
        lines.append("## Associations")
        lines.append("")
        lines.append("Groups as columns; categories ranked by total "
                     "significant score.")
        lines.append("")
        labels = [g.label for g in report.groups]
        lines.append("| category | " + " | ".join(labels) + " |")
        lines.append("|" + "---|" * (len(labels) + 1))
        for test in ranked:
            by_group = {p.group_id: p for p in test.pairs}
            row = [f"#{test.category_id}"]
            for g in report.groups:
                pair = by_group.get(g.group_id)
                if pair is not None and pair.significant:
                    row.append(", ".join(_masked(w, mask) for w in pair.words))
                else:
                    row.append("")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
        silent = len(report.tests) - len(ranked)
        if silent:
            lines.append(f"{silent} of {len(report.tests)} categories had "
                         f"no significant pairs.")
            lines.append("")
    return "\n".join(lines).encode("utf-8")


def render(report: AuditReport, format: str, *, mask=None) -> bytes:
    """Serialize a report as canonical json, csv, or markdown bytes.

    ``mask`` is an optional collection of attribute words to redact in the
    output; group names are never masked.
    """
    mask = frozenset(mask) if mask else frozenset()
    if format == "json":
        payload = _json_payload(report, mask)
        text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
        return (text + "\n").encode("utf-8")
    if format == "csv":
        return _csv_bytes(report, mask)
    if format == "markdown":
        return _markdown_bytes(report, mask)
    raise ConfigError(f"unknown report format: {format!r}")


def _stats_from_payload(payload) -> GroupStats | None:
    if payload is None:
        return None
    return GroupStats(
        size=int(payload["size"]),
        fraction_female=None if payload["fraction_female"] is None
        else float(payload["fraction_female"]),
        mean_birth_year=None if payload["mean_birth_year"] is None
        else float(payload["mean_birth_year"]),
        race_pcts={k: float(v) for k, v in payload["race_pcts"].items()},
    )


def report_from_json(data) -> AuditReport:
    """Parse bytes produced by ``render(report, "json")``."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"report is not valid JSON: {exc}") from None
    try:
        if payload["schema_version"] != SCHEMA_VERSION:
            raise FormatError(
                f"unsupported schema_version {payload['schema_version']!r}")
        groups = tuple(
            GroupSummary(
                group_id=int(g["group_id"]), label=g["label"],
                size=int(g["size"]), illustrative=tuple(g["illustrative"]),
                residual=int(g["residual"]),
                stats=_stats_from_payload(g["stats"]))
            for g in payload["groups"])
        tests = tuple(
            TestResult(
                category_id=int(t["category_id"]), rank=int(t["rank"]),
                total_significant_score=float(t["total_significant_score"]),
                significant_count=int(t["significant_count"]),
                pairs=tuple(
                    PairResult(
                        group_id=int(p["group_id"]),
                        complete=bool(p["complete"]),
                        pool_count=int(p["pool_count"]),
                        words=None if p["words"] is None
                        else tuple(p["words"]),
                        sigma=None if p["sigma"] is None
                        else float(p["sigma"]),
                        pvalue=None if p["pvalue"] is None
                        else float(p["pvalue"]),
                        significant=bool(p["significant"]))
                    for p in t["pairs"]))
            for t in payload["tests"])
        return AuditReport(
            schema_version=int(payload["schema_version"]),
            config=payload["config"], seed=int(payload["seed"]),
            embedding_fingerprint=payload["embedding_fingerprint"],
            alpha=float(payload["alpha"]),
            critical_p=float(payload["critical_p"]),
            groups=groups, tests=tests,
            fourtuples_total=int(payload["fourtuples"]["total"]),
            fourtuples_positive=int(payload["fourtuples"]["positive"]),
            fourtuples_fraction=None
            if payload["fourtuples"]["fraction"] is None
            else float(payload["fourtuples"]["fraction"]))
    except KeyError as exc:
        raise FormatError(f"report is missing field {exc.args[0]!r}") from None


# -------------------------------------------------------------------- zipf

def zipf_plot_data(table: NameTable, emb: UnitEmbedding, removed=()) -> str:
    """CSV of (rank_index, log_probability, kept) rows for frequency plots.

    One row per table name, ordered by embedding rank; the log is natural
    and taken of the name's share of the table's total count.
    """
    removed = set(removed)
    total = sum(r.total_count for r in table.records)
    if total <= 0:
        raise ConfigError("frequency plot needs positive name counts")
    rows = []
    for record in table.records:
        if record.total_count <= 0:
            raise ConfigError(
                f"name {record.name!r} has no count; frequency plot "
                f"needs positive counts")
        rows.append((emb.rank(record.name),
                     math.log(record.total_count / total),
                     record.name not in removed))
    rows.sort()
    lines = ["rank_index,log_probability,kept"]
    for rank, logp, kept in rows:
        lines.append(f"{rank},{logp!r},{'true' if kept else 'false'}")
    return "\n".join(lines) + "\n"
