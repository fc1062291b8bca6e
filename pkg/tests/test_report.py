import math

import numpy as np
import pytest

from ube_audit.embedding import UnitEmbedding
from ube_audit.errors import ConfigError, FormatError
from ube_audit.names import GroupStats, NameRecord, NameTable
from ube_audit.report import (
    AuditReport,
    GroupSummary,
    PairResult,
    TestResult,
    illustrative_names,
    render,
    report_from_json,
    zipf_plot_data,
)


# ------------------------------------------------------- illustrative names

def _emb(tokens, vectors):
    return UnitEmbedding.build(tokens, np.asarray(vectors, dtype=np.float64))


def test_first_pick_is_closest_to_group_mean():
    # Dots with the group mean: a 0.663, b 0.710, c 0.380 -> b leads.
    emb = _emb(["a", "b", "c"],
               [[1.0, 0.0], [0.99, 0.14106735979665885], [0.0, 1.0]])
    assert illustrative_names(["a", "b", "c"], emb, 1) == ("b",)


def test_exhaustive_pick_is_a_permutation():
    emb = _emb(["a", "b", "c"], [[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    assert sorted(illustrative_names(["a", "b", "c"], emb, 3)) == ["a", "b", "c"]


def test_oversized_k_returns_all():
    emb = _emb(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    assert len(illustrative_names(["a", "b"], emb, 5)) == 2


def test_tie_breaks_toward_lower_rank():
    # Both names have the same cosine to the (0.5, 0.5) mean.
    emb = _emb(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    assert illustrative_names(["b", "a"], emb, 1) == ("a",)


def test_prefix_property():
    rng = np.random.default_rng(3)
    tokens = [f"n{i}" for i in range(12)]
    emb = _emb(tokens, rng.standard_normal((12, 6)))
    for normalized in (False, True):
        seq = [illustrative_names(tokens, emb, k, normalized=normalized)
               for k in range(1, 13)]
        for shorter, longer in zip(seq, seq[1:]):
            assert longer[:len(shorter)] == shorter


def _greedy_reference(tokens, emb, k, normalized):
    group = emb.rows(tokens)
    target = group.mean(axis=0)
    pool = sorted(tokens, key=emb.rank)
    chosen = []
    while len(chosen) < k:
        best, best_score = None, -np.inf
        for tok in pool:
            if tok in chosen:
                continue
            stack = emb.rows(chosen + [tok]).mean(axis=0)
            score = stack @ target
            if normalized:
                score /= np.linalg.norm(stack) * np.linalg.norm(target)
            if score > best_score:
                best, best_score = tok, score
        chosen.append(best)
    return tuple(chosen)


@pytest.mark.parametrize("normalized", [False, True])
def test_greedy_matches_reference(normalized):
    rng = np.random.default_rng(11)
    tokens = [f"n{i}" for i in range(9)]
    emb = _emb(tokens, rng.standard_normal((9, 5)) + 0.4)
    got = illustrative_names(tokens, emb, 5, normalized=normalized)
    assert got == _greedy_reference(tokens, emb, 5, normalized)


def test_illustrative_rejects_bad_input():
    emb = _emb(["a"], [[1.0, 0.0]])
    with pytest.raises(ConfigError):
        illustrative_names([], emb, 1)
    with pytest.raises(ConfigError):
        illustrative_names(["a"], emb, 0)


# ---------------------------------------------------------------- rendering

def _report(**overrides):
    groups = (
        GroupSummary(group_id=1, label="F1", size=3,
                     illustrative=("mary", "lisa"), residual=1,
                     stats=GroupStats(size=3, fraction_female=0.9,
                                      mean_birth_year=1975.0, race_pcts={})),
        GroupSummary(group_id=0, label="F2", size=2,
                     illustrative=("john",), residual=1,
                     stats=GroupStats(size=2, fraction_female=0.1,
                                      mean_birth_year=1980.5, race_pcts={})),
    )
    tests = (
        TestResult(category_id=3, rank=1, total_significant_score=0.5,
                   significant_count=1, pairs=(
                       PairResult(group_id=0, complete=True, pool_count=5,
                                  words=("alpha", "beta"), sigma=0.1,
                                  pvalue=0.2, significant=False),
                       PairResult(group_id=1, complete=True, pool_count=7,
                                  words=("gamma", "delta"), sigma=0.5,
                                  pvalue=0.001, significant=True))),
        TestResult(category_id=0, rank=2, total_significant_score=0.0,
                   significant_count=0, pairs=(
                       PairResult(group_id=0, complete=False, pool_count=1,
                                  words=None, sigma=None, pvalue=None,
                                  significant=False),
                       PairResult(group_id=1, complete=True, pool_count=4,
                                  words=("epsilon", "zeta"), sigma=-0.05,
                                  pvalue=0.9, significant=False))),
    )
    fields = dict(schema_version=1, config={"n_groups": 2, "alpha": 0.05},
                  seed=7, embedding_fingerprint="deadbeef", alpha=0.05,
                  critical_p=0.001, groups=groups, tests=tests,
                  fourtuples_total=0, fourtuples_positive=0,
                  fourtuples_fraction=None, wall_seconds=12.5)
    fields.update(overrides)
    return AuditReport(**fields)


def test_json_round_trip_is_byte_identical():
    report = _report()
    blob = render(report, "json")
    reread = report_from_json(blob)
    assert render(reread, "json") == blob
    assert reread.wall_seconds is None
    assert reread.groups == report.groups
    assert reread.tests == report.tests


def test_json_excludes_wall_time():
    assert b"wall" not in render(_report(), "json")


def test_json_parse_accepts_text():
    report = _report()
    assert report_from_json(render(report, "json").decode()) is not None


def test_csv_has_one_row_per_complete_pair():
    lines = render(_report(), "csv").decode().splitlines()
    header, rows = lines[0], lines[1:]
    assert header == "rank,category_id,group_id,group_label,words,sigma,pvalue,significant"
    assert len(rows) == 3  # one pair of four is incomplete
    significant = [row for row in rows if row.endswith(",true")]
    assert len(significant) == 1
    assert "gamma|delta" in significant[0]


def test_markdown_layout():
    text = render(_report(), "markdown").decode()
    assert "offensive" in text  # unmasked-content banner
    assert "| category | F1 | F2 |" in text
    assert "gamma, delta" in text
    # The zero-significant category is only counted, not tabulated.
    assert "1 of 2 categories" in text
    assert "F1 | 3 " in text


def test_markdown_without_significant_pairs():
    report = _report()
    tests = tuple(
        TestResult(t.category_id, t.rank, 0.0, 0, tuple(
            PairResult(p.group_id, p.complete, p.pool_count, p.words,
                       p.sigma, p.pvalue, False) for p in t.pairs))
        for t in report.tests)
    text = render(_report(tests=tests), "markdown").decode()
    assert "no significant associations" in text
    assert "| group |" in text  # the groups table still renders


def test_masking_applies_to_rendered_words():
    masked = render(_report(), "markdown", mask={"gamma"}).decode()
    assert "gamma" not in masked
    assert "g****" in masked
    masked_json = render(_report(), "json", mask={"gamma"}).decode()
    assert "gamma" not in masked_json and "g****" in masked_json
    # Masked output still round-trips byte-identically.
    blob = render(_report(), "json", mask={"gamma"})
    assert render(report_from_json(blob), "json") == blob


def test_unknown_format_rejected():
    with pytest.raises(ConfigError):
        render(_report(), "yaml")


def test_unknown_schema_version_rejected():
    blob = render(_report(), "json").decode().replace(
        '"schema_version": 1', '"schema_version": 99')
    with pytest.raises(FormatError):
        report_from_json(blob)


# -------------------------------------------------------------------- zipf

def _table(counts):
    records = tuple(NameRecord(name=f"n{i}", total_count=c)
                    for i, c in enumerate(counts))
    return NameTable(records=records, source="ssa")


def test_zipf_log_probabilities():
    emb = _emb(["n0", "n1", "n2"], np.eye(3))
    lines = zipf_plot_data(_table([90, 9, 1]), emb, removed=()).splitlines()
    assert lines[0] == "rank_index,log_probability,kept"
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert values == pytest.approx([math.log(0.9), math.log(0.09), math.log(0.01)])
    assert all(line.endswith(",true") for line in lines[1:])


def test_zipf_flags_removed_names():
    emb = _emb(["n0", "n1", "n2"], np.eye(3))
    lines = zipf_plot_data(_table([5, 3, 2]), emb, removed={"n1"}).splitlines()
    assert len(lines) == 4
    flags = [line.split(",")[2] for line in lines[1:]]
    assert flags == ["true", "false", "true"]


def test_zipf_orders_rows_by_embedding_rank():
    # Table order differs from vocabulary order; rows follow the vocabulary.
    emb = _emb(["n2", "n0", "n1"], np.eye(3))
    lines = zipf_plot_data(_table([5, 3, 2]), emb, removed=()).splitlines()
    ranks = [int(line.split(",")[0]) for line in lines[1:]]
    assert ranks == [0, 1, 2]


def test_zipf_requires_counts():
    emb = _emb(["n0"], [[1.0, 0.0]])
    table = NameTable(records=(NameRecord(name="n0", total_count=0),),
                      source="plain")
    with pytest.raises(ConfigError):
        zipf_plot_data(table, emb, removed=())
