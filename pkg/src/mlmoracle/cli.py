"""Command-line entry point for the full reference pipeline.

Subcommands: validate, enumerate, sample, oracle, sweep, export-eval,
score.  ``sweep`` runs the whole pipeline for one grammar: validate,
enumerate to coverage, build per-k reference tables and evaluation
manifests, compute the metrics CSV, and record a run manifest with a
content hash per artifact.  Re-running with the same configuration
reproduces every artifact byte for byte.  Environment variables are
never consulted.

Exit codes: 0 success, 1 validation failure, 2 coverage unreachable,
3 I/O failure, 4 missing prediction instances.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .analysis import (
    DEFAULT_FLOOR,
    MetricsReport,
    ModelMetrics,
    conditional_entropy,
    format_reports,
    model_divergence,
    perplexity,
    task_divergence,
    write_sweep_csv,
)
from .datagen import CorpusSpec, chi2_fitness, read_corpus, sample_corpus
from .enumeration import (
    CoverageError,
    enumerate_to_coverage,
    read_sentence_table,
    write_sentence_table,
)
from .grammar import Grammar, GrammarError, parse_external_grammar, parse_grammar, validate
from .oracle import (
    MissingInstancesError,
    build_ordered,
    erase_order,
    export_eval_set,
    read_manifest,
    read_predictions,
    read_reference_table,
    write_reference_table,
)
from .datagen import emit_vocab

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_COVERAGE = 2
EXIT_IO = 3
EXIT_MISSING = 4


@dataclass
class RunConfig:
    grammar_path: str
    out_dir: str
    threshold: float = 0.75
    ks: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    max_length: int = 64
    seed: int = 0
    weighted: bool = True
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        ks = tuple(self.ks)
        if not ks or list(ks) != sorted(set(ks)) or ks[0] < 1:
            raise ValueError("k list must be non-empty, ascending, positive")
        self.ks = ks


class _CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_grammar(path: str, external: bool = False) -> Grammar:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliFailure(EXIT_IO, f"cannot read grammar: {exc}") from exc
    try:
        return parse_external_grammar(text) if external else parse_grammar(text)
    except GrammarError as exc:
        raise _CliFailure(EXIT_INVALID, f"grammar error: {exc}") from exc


def _require_valid(grammar: Grammar) -> None:
    violations = validate(grammar)
    if violations:
        lines = "\n".join(f"  {v.check}: {v.message}" for v in violations)
        raise _CliFailure(EXIT_INVALID, f"grammar is invalid:\n{lines}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_validate(args) -> int:
    grammar = _load_grammar(args.grammar, args.external)
    violations = validate(grammar)
    if violations:
        for v in violations:
            print(f"{v.check}: {v.message}")
        return EXIT_INVALID
    print(
        f"ok: {len(grammar.rules)} rules, {len(grammar.nonterminals)} nonterminals, "
        f"{len(grammar.terminals)} terminals"
    )
    return EXIT_OK


def cmd_enumerate(args) -> int:
    grammar = _load_grammar(args.grammar, args.external)
    _require_valid(grammar)
    try:
        table = enumerate_to_coverage(grammar, args.threshold, args.max_length)
    except CoverageError as exc:
        raise _CliFailure(EXIT_COVERAGE, str(exc)) from exc
    _write(args.out, lambda p: write_sentence_table(table, p))
    print(f"{len(table)} sentences, covered mass {table.covered_mass:.12g}")
    return EXIT_OK


def cmd_sample(args) -> int:
    grammar = _load_grammar(args.grammar, args.external)
    _require_valid(grammar)
    spec = CorpusSpec(
        train_size=args.train,
        validation_size=args.valid,
        test_size=args.test,
        seed=args.seed,
        max_length=args.max_length,
    )
    out_dir = Path(args.out_dir)
    try:
        stats = sample_corpus(grammar, spec, out_dir)
        (out_dir / "stats.txt").write_text(stats.as_lines(), encoding="utf-8")
    except OSError as exc:
        raise _CliFailure(EXIT_IO, f"cannot write corpus: {exc}") from exc
    if args.fitness:
        table = enumerate_to_coverage(grammar, args.threshold, args.max_length)
        report = chi2_fitness(read_corpus(out_dir / "train.txt"), table)
        print(
            f"chi2 {report.statistic:.6g} on {report.degrees_of_freedom} dof "
            f"({report.observations} observations)"
        )
    print(f"mean sentence length {stats.mean_sentence_length:.4f}")
    return EXIT_OK


def _write(path, writer) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        writer(path)
    except OSError as exc:
        raise _CliFailure(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _read_table(path):
    try:
        return read_sentence_table(path)
    except OSError as exc:
        raise _CliFailure(EXIT_IO, f"cannot read sentence table: {exc}") from exc


def cmd_oracle(args) -> int:
    table = _read_table(args.table)
    out_dir = Path(args.out_dir)
    for k in args.k:
        ordered = build_ordered(table, k)
        unordered = erase_order(ordered)
        _write(out_dir / f"ordered_k{k}.tsv", lambda p, t=ordered: write_reference_table(t, p))
        _write(out_dir / f"unordered_k{k}.tsv", lambda p, t=unordered: write_reference_table(t, p))
        print(f"k={k}: {len(ordered.entries)} instances, {len(unordered.entries)} classes")
    return EXIT_OK


def cmd_export_eval(args) -> int:
    table = _read_table(args.table)
    for k in args.k:
        ordered = build_ordered(table, k)
        out = Path(args.out_dir) / f"manifest_k{k}.tsv"
        _write(out, lambda p, t=ordered: export_eval_set(t, table, p))
        print(f"k={k}: manifest written to {out}")
    return EXIT_OK


def _pipeline(config: RunConfig, external: bool = False) -> list[MetricsReport]:
    grammar = _load_grammar(config.grammar_path, external)
    _require_valid(grammar)
    try:
        table = enumerate_to_coverage(grammar, config.threshold, config.max_length)
    except CoverageError as exc:
        raise _CliFailure(EXIT_COVERAGE, str(exc)) from exc

    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _CliFailure(EXIT_IO, str(exc)) from exc
    artifacts: list[Path] = []

    def emit(name: str, writer) -> None:
        path = out_dir / name
        _write(path, writer)
        artifacts.append(path)

    emit("sentence_table.tsv", lambda p: write_sentence_table(table, p))
    emit("vocab.txt", lambda p: emit_vocab(grammar, p))
    reports = []
    for k in config.ks:
        try:
            ordered = build_ordered(table, k)
        except ValueError as exc:
            raise _CliFailure(EXIT_INVALID, f"k={k}: {exc}") from exc
        unordered = erase_order(ordered)
        emit(f"ordered_k{k}.tsv", lambda p, t=ordered: write_reference_table(t, p))
        emit(f"unordered_k{k}.tsv", lambda p, t=unordered: write_reference_table(t, p))
        emit(f"manifest_k{k}.tsv", lambda p, t=ordered: export_eval_set(t, table, p))
        reports.append(
            MetricsReport(
                k=k,
                h_ordered=conditional_entropy(ordered),
                h_unordered=conditional_entropy(unordered),
                d_task=task_divergence(ordered, unordered, weighted=config.weighted),
            )
        )
    emit("sweep.csv", lambda p: write_sweep_csv(reports, p))

    # out_dir is where the manifest itself lives; recording it would make
    # otherwise-identical runs compare unequal.
    recorded = {key: val for key, val in asdict(config).items() if key != "out_dir"}
    manifest = {
        "tool": {"name": "mlmoracle", "version": __version__},
        "config": recorded,
        "covered_mass": f"{table.covered_mass:.17g}",
        "sentences": len(table),
        "artifacts": {path.name: _sha256(path) for path in sorted(artifacts)},
    }
    _write(
        out_dir / "run_manifest.json",
        lambda p: Path(p).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n"),
    )
    return reports


def cmd_sweep(args) -> int:
    try:
        config = RunConfig(
            grammar_path=args.grammar,
            out_dir=args.out_dir,
            threshold=args.threshold,
            ks=tuple(args.k),
            max_length=args.max_length,
            seed=args.seed,
            weighted=not args.unweighted,
            floor=args.floor,
        )
    except ValueError as exc:
        raise _CliFailure(EXIT_INVALID, str(exc)) from exc
    reports = _pipeline(config, external=args.external)
    print(format_reports(reports), end="")
    return EXIT_OK


def cmd_score(args) -> int:
    run_dir = Path(args.run_dir)
    preds_dir = Path(args.predictions_dir)
    manifest_paths = sorted(run_dir.glob("manifest_k*.tsv"), key=lambda p: int(p.stem.split("_k")[1]))
    if not manifest_paths:
        raise _CliFailure(EXIT_IO, f"no manifests under {run_dir}")
    try:
        vocab_lines = (run_dir / "vocab.txt").read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise _CliFailure(EXIT_IO, f"cannot read vocabulary: {exc}") from exc
    terminals = [tok for tok in vocab_lines if tok not in ("[PAD]", "[MASK]")]

    reports = []
    for manifest_path in manifest_paths:
        k = int(manifest_path.stem.split("_k")[1])
        pred_path = preds_dir / f"predictions_k{k}.tsv"
        try:
            manifest = read_manifest(manifest_path)
            ordered = read_reference_table(run_dir / f"ordered_k{k}.tsv")
            unordered = read_reference_table(run_dir / f"unordered_k{k}.tsv")
            model = read_predictions(pred_path, terminals, manifest)
        except MissingInstancesError as exc:
            raise _CliFailure(EXIT_MISSING, f"k={k}: {exc}") from exc
        except OSError as exc:
            raise _CliFailure(EXIT_IO, str(exc)) from exc
        fit_o = model_divergence(ordered, model, floor=args.floor)
        fit_u = model_divergence(unordered, model, floor=args.floor)
        ppl = perplexity(model, manifest, floor=args.floor)
        report = MetricsReport(
            k=k,
            h_ordered=conditional_entropy(ordered),
            h_unordered=conditional_entropy(unordered),
            d_task=task_divergence(ordered, unordered),
            models={
                args.model_name: ModelMetrics(
                    cross_entropy_ordered=fit_o.cross_entropy,
                    cross_entropy_unordered=fit_u.cross_entropy,
                    kl_ordered=fit_o.kl,
                    kl_unordered=fit_u.kl,
                    perplexity=ppl,
                )
            },
        )
        reports.append(report)
        better = "ordered" if fit_o.kl < fit_u.kl else "unordered"
        print(
            f"k={k}: kl_ordered={fit_o.kl:.6f} kl_unordered={fit_u.kl:.6f} "
            f"ppl={ppl:.4f} -> fits the {better} reference better"
        )
    _write(args.out, lambda p: write_sweep_csv(reports, p))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmoracle",
        description="Exact masked-completion references for weighted CFG languages",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grammar(p):
        p.add_argument("grammar", help="grammar file path")
        p.add_argument(
            "--external",
            action="store_true",
            help="parse the \"LHS -> 'tok' [p]\" release format instead of the native one",
        )

    p = sub.add_parser("validate", help="check grammar invariants")
    add_grammar(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("enumerate", help="enumerate sentences to a coverage threshold")
    add_grammar(p)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--max-length", type=int, default=64)
    p.add_argument("--out", required=True, help="sentence table output path")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("sample", help="sample train/valid/test corpora")
    add_grammar(p)
    p.add_argument("--train", type=int, default=100000)
    p.add_argument("--valid", type=int, default=10000)
    p.add_argument("--test", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-length", type=int, default=64)
    p.add_argument("--threshold", type=float, default=0.75, help="coverage for --fitness")
    p.add_argument("--fitness", action="store_true", help="also run the chi-squared check")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle", help="build reference tables from a sentence table")
    p.add_argument("--table", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-eval", help="write evaluation manifests")
    p.add_argument("--table", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_eval)

    p = sub.add_parser("sweep", help="full pipeline: tables, manifests, metrics CSV")
    add_grammar(p)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    p.add_argument("--max-length", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unweighted", action="store_true", help="literal unweighted divergence sum")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", help="score a predictions directory against a sweep run")
    p.add_argument("--run-dir", required=True, help="directory written by sweep")
    p.add_argument("--predictions-dir", required=True, help="holds predictions_k<K>.tsv files")
    p.add_argument("--model-name", default="model")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--out", required=True, help="metrics CSV output path")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
