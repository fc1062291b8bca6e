"""Unsupervised enumeration of significant word-embedding associations.

The package audits a word embedding for biases tied to a list of target
names: names are clustered into groups, frequent words into categories,
every (group, category) cell is scored and tested against a
rotational null, and significant cells are screened for potential
indirect (proxy) biases. ``UbeAuditor``/``run_audit`` drive the whole
pipeline; the stage modules are importable on their own.
"""
from .auditor import UbeAuditor, run_audit
from .clustering import Clustering, KMeansPP, kmeans_pp, nearest_center
from .embedding import (RawEmbedding, UnitEmbedding, WordPool,
                        frequent_lowercase_words, load_text_vectors,
                        load_word2vec_binary, normalize,
                        save_text_vectors, save_word2vec_binary)
from .enumeration import (CellScores, NullScores, compute_null_scores,
                          load_null_scores, save_null_scores, score_pairs,
                          select_words, voronoi_partition)
from .errors import (ConfigError, FormatError, IngestError, TruncatedFile,
                     UnknownToken)
from .names import (GroupStats, NameRecord, NameTable, clean_names,
                    demographic_summary, ingest_census_surnames, ingest_ssa,
                    restrict_to_vocabulary)
from .proxy import (FourTuple, indirect_bias_rate, is_potential_indirect_bias,
                    iter_fourtuples, write_fourtuples_csv)
from .report import (AuditReport, GroupSummary, PairResult, TestResult,
                     illustrative_names, render, report_from_json,
                     zipf_plot_data)
from .rotations import derive_seed, haar_rotation, rotation_rng, seeded_rng
from .significance import benjamini_hochberg, monte_carlo_pvalue
from .weat import association_score, set_mean, weat_g, weat_s

__version__ = "0.1.0"

__all__ = [
    "AuditReport", "CellScores", "Clustering", "ConfigError", "FormatError",
    "FourTuple", "GroupStats", "GroupSummary", "IngestError", "KMeansPP",
    "NameRecord", "NameTable", "NullScores", "PairResult", "RawEmbedding",
    "TestResult", "TruncatedFile", "UbeAuditor", "UnitEmbedding",
    "UnknownToken", "WordPool", "association_score", "benjamini_hochberg",
    "clean_names", "compute_null_scores", "demographic_summary",
    "derive_seed", "frequent_lowercase_words", "haar_rotation",
    "illustrative_names", "indirect_bias_rate", "ingest_census_surnames",
    "ingest_ssa", "is_potential_indirect_bias", "iter_fourtuples",
    "kmeans_pp", "load_null_scores", "load_text_vectors",
    "load_word2vec_binary", "monte_carlo_pvalue", "nearest_center",
    "normalize", "render", "report_from_json", "restrict_to_vocabulary",
    "rotation_rng", "run_audit", "save_null_scores", "save_text_vectors",
    "save_word2vec_binary", "score_pairs", "seeded_rng", "select_words",
    "set_mean", "voronoi_partition", "weat_g", "weat_s",
    "write_fourtuples_csv", "zipf_plot_data",
]
