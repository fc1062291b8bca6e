"""Command-line entry point: ``ube-audit run | zipf | names``.

``run`` executes the full audit and writes the canonical JSON report
(plus optional markdown/CSV/fourtuple/cluster outputs), ``zipf`` emits
frequency-plot data for the name table, and ``names`` runs ingestion and
cleaning alone. Exit codes: 0 success, 2 configuration error, 3 input
format error, 4 runtime failure.

Flags can come from a key=value config file (``--config``); explicit
flags override it. Keys mirror flag names without the leading dashes.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .auditor import UbeAuditor, _as_table
from .clustering import write_assignments_csv
from .embedding import (UnitEmbedding, load_text_vectors,
                        load_word2vec_binary, normalize)
from .errors import ConfigError, FormatError, IngestError, TruncatedFile
from .names import (NameTable, clean_names, ingest_census_surnames,
                    ingest_ssa, restrict_to_vocabulary)
from .proxy import write_fourtuples_csv
from .report import render, zipf_plot_data

log = logging.getLogger(__name__)

_CLEAN = {"margin": "margin", "mean-sim": "mean_similarity"}
_SWITCH_KEYS = {"allow-multiplicities", "illustrative-normalized", "quiet"}
_SUBCOMMANDS = ("run", "zipf", "names")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    inputs = common.add_argument_group("inputs")
    inputs.add_argument("--embedding", required=True,
                        help="embedding file to audit")
    inputs.add_argument("--format", choices=("w2v-bin", "text"),
                        default="w2v-bin", help="embedding file format")
    inputs.add_argument("--header", choices=("expected", "absent", "auto"),
                        default="auto",
                        help="text-format header handling")
    inputs.add_argument("--names", required=True,
                        help="name source (SSA directory, census CSV, or "
                             "one name per line)")
    inputs.add_argument("--names-kind", choices=("ssa", "census", "plain"),
                        default="ssa", help="how to ingest --names")
    inputs.add_argument("--min-count", type=int, default=1000,
                        help="drop names with fewer total occurrences")
    inputs.add_argument("--year-min", type=int, default=1938,
                        help="first SSA birth year")
    inputs.add_argument("--year-max", type=int, default=2017,
                        help="last SSA birth year")
    inputs.add_argument("--names-case",
                        choices=("title", "lower", "upper", "keep"),
                        default="title", help="recase census surnames")
    cleaning = common.add_argument_group("cleaning")
    cleaning.add_argument("--clean", choices=sorted(_CLEAN),
                          default="margin", help="name-cleaning method")
    cleaning.add_argument("--removal-fraction", type=float, default=0.2,
                          help="fraction of names to remove (0 disables)")
    cleaning.add_argument("--negatives-pool", type=int, default=50000,
                          help="frequent-token pool for margin negatives")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for every random stage")
    common.add_argument("--config", metavar="FILE",
                        help="key=value file supplying defaults for "
                             "any flag")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress logging")

    parser = argparse.ArgumentParser(
        prog="ube-audit",
        description="Enumerate statistically significant name/word "
                    "associations in a word embedding.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common],
                         help="run the full audit")
    run.add_argument("-n", type=int, default=12, metavar="N",
                     help="number of name groups")
    run.add_argument("-m", type=int, default=64, metavar="M",
                     help="number of word categories")
    run.add_argument("-M", type=int, default=30000, metavar="POOL",
                     help="size of the frequent-word pool")
    run.add_argument("-t", type=int, default=3, metavar="T",
                     help="words selected per (group, category) pair")
    run.add_argument("--alpha", type=float, default=0.05,
                     help="false discovery rate target")
    run.add_argument("--rotations", type=int, default=10000,
                     help="random rotations for the null")
    run.add_argument("--allow-multiplicities", action="store_true",
                     help="score whole categories instead of their "
                          "nearest-group cells")
    run.add_argument("--illustrative", type=int, default=5, metavar="K",
                     help="illustrative names shown per group")
    run.add_argument("--illustrative-normalized", action="store_true",
                     help="pick illustrative names by normalized cosine")
    run.add_argument("--mask-list", metavar="FILE",
                     help="words to mask in rendered reports, one per line")
    run.add_argument("--out", required=True, help="report JSON path")
    run.add_argument("--markdown", help="also write a markdown report")
    run.add_argument("--csv", help="also write a per-pair CSV report")
    run.add_argument("--null-cache",
                     help="reuse (or create) a null-score cache file")
    run.add_argument("--fourtuples",
                     help="write potential-indirect-bias fourtuples CSV")
    run.add_argument("--dump-name-clusters", metavar="FILE",
                     help="write name cluster assignments CSV")
    run.add_argument("--dump-word-clusters", metavar="FILE",
                     help="write word category assignments CSV")
    run.set_defaults(handler=_cmd_run)

    zipf = sub.add_parser("zipf", parents=[common],
                          help="emit frequency-plot data for the names")
    zipf.add_argument("--out", default="-",
                      help="output CSV path (default stdout)")
    zipf.set_defaults(handler=_cmd_zipf)

    names = sub.add_parser("names", parents=[common],
                           help="run name ingestion and cleaning only")
    names.add_argument("--out", default="-",
                       help="output CSV path (default stdout)")
    names.set_defaults(handler=_cmd_names)
    return parser


# ------------------------------------------------------------ config file

def _config_argv(text: str, path: str) -> list[str]:
    argv: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        flag = f"-{key}" if len(key) == 1 else f"--{key}"
        if key in _SWITCH_KEYS:
            if value.lower() == "true":
                argv.append(flag)
            elif value.lower() != "false":
                raise ConfigError(
                    f"{path}:{lineno}: {key} must be true or false")
        else:
            argv.extend([flag, value])
    return argv


def _inject_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    if argv.count("--config") > 1:
        raise ConfigError("give --config at most once")
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    if not rest or rest[0] not in _SUBCOMMANDS:
        raise ConfigError("--config must follow a subcommand")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    # Config entries go first so explicit flags override them.
    return [rest[0], *_config_argv(text, path), *rest[1:]]


# ------------------------------------------------------------------ input

def _load_embedding(args) -> UnitEmbedding:
    try:
        if args.format == "w2v-bin":
            raw = load_word2vec_binary(args.embedding)
        else:
            raw = load_text_vectors(args.embedding, header=args.header)
    except OSError as exc:
        raise FormatError(f"cannot read embedding: {exc}") from None
    emb = normalize(raw)
    log.info("cli.embedding tokens=%d dim=%d", len(emb), emb.dim)
    return emb


def _load_names(args) -> NameTable:
    if args.names_kind == "ssa":
        return ingest_ssa(args.names, year_min=args.year_min,
                          year_max=args.year_max, min_count=args.min_count)
    if args.names_kind == "census":
        return ingest_census_surnames(args.names, min_count=args.min_count,
                                      case=args.names_case)
    try:
        text = Path(args.names).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read names: {exc}") from None
    return _as_table(line.strip() for line in text.splitlines()
                     if line.strip())


def _read_mask(path) -> set[str] | None:
    if path is None:
        return None
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read mask list {path}: {exc}") from None
    return {line.strip() for line in text.splitlines()
            if line.strip() and not line.strip().startswith("#")}


def _write_output(path, data: bytes) -> None:
    if path == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(path).write_bytes(data)


# ------------------------------------------------------------- subcommands

def _cmd_run(args) -> int:
    emb = _load_embedding(args)
    table = _load_names(args)
    auditor = UbeAuditor(
        n_groups=args.n, n_categories=args.m, pool_size=args.M,
        words_per_pair=args.t, alpha=args.alpha, rotations=args.rotations,
        seed=args.seed, allow_multiplicities=args.allow_multiplicities,
        clean_method=_CLEAN[args.clean],
        removal_fraction=args.removal_fraction,
        negatives_pool=args.negatives_pool,
        illustrative_count=args.illustrative,
        illustrative_normalized=args.illustrative_normalized)
    auditor.fit(emb, table, null_cache=args.null_cache)
    mask = _read_mask(args.mask_list)
    report = auditor.report_
    _write_output(args.out, render(report, "json", mask=mask))
    if args.markdown:
        _write_output(args.markdown, render(report, "markdown", mask=mask))
    if args.csv:
        _write_output(args.csv, render(report, "csv", mask=mask))
    if args.fourtuples:
        write_fourtuples_csv(args.fourtuples, auditor.fourtuples_)
    if args.dump_name_clusters:
        write_assignments_csv(args.dump_name_clusters, auditor.names_,
                              auditor.name_clusters_.labels)
    if args.dump_word_clusters:
        write_assignments_csv(args.dump_word_clusters, auditor.pool_.tokens,
                              auditor.word_clusters_.labels)
    log.info("cli.run significant=%d critical_p=%.6g wall=%.1fs",
             sum(t.significant_count for t in report.tests),
             report.critical_p, auditor.fit_seconds_)
    return 0


def _prepared_names(args, emb: UnitEmbedding):
    table = _load_names(args)
    table, _ = restrict_to_vocabulary(table, emb)
    if len(table) == 0:
        raise ConfigError("no name is in the embedding vocabulary")
    kept = clean_names(table, emb, removal_fraction=args.removal_fraction,
                       method=_CLEAN[args.clean],
                       negatives_pool=args.negatives_pool, seed=args.seed)
    removed = set(table.names) - set(kept.names)
    return table, removed


def _cmd_zipf(args) -> int:
    if args.names_kind == "plain":
        raise ConfigError(
            "frequency-plot data needs name counts; "
            "use --names-kind ssa or census")
    emb = _load_embedding(args)
    table, removed = _prepared_names(args, emb)
    _write_output(args.out, zipf_plot_data(table, emb, removed).encode())
    return 0


def _cmd_names(args) -> int:
    emb = _load_embedding(args)
    table, removed = _prepared_names(args, emb)
    lines = ["name,total_count,kept"]
    for record in table.records:
        kept = "false" if record.name in removed else "true"
        lines.append(f"{record.name},{record.total_count},{kept}")
    _write_output(args.out, ("\n".join(lines) + "\n").encode())
    return 0


# ------------------------------------------------------------------- main

def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _inject_config(argv)
        args = _build_parser().parse_args(argv)
        logging.basicConfig(stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        logging.getLogger("ube_audit").setLevel(
            logging.WARNING if args.quiet else logging.INFO)
        return args.handler(args)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return exc.code if isinstance(exc.code, int) else 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, TruncatedFile, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        log.exception("cli.failed")
        return 4


if __name__ == "__main__":
    sys.exit(main())
