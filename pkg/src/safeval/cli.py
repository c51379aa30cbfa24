"""``safeval`` command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 bad input,
4 backend failure. Failures also print one JSON object with an ``error``
category to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable

from safeval import __version__
from safeval.augmentation import build_negatives, load_triplets, save_triplets
from safeval.backends import CachedBackend, open_backends
from safeval.backends.base import Backends
from safeval.config import CONFIG_ENV_VAR, ConfigError, RunConfig, load_config, parse_descriptor
from safeval.errors import BackendError, FormatError, ScoringError
from safeval.harness.corpus import load_corpus
from safeval.harness.correlate import (
    SAFEVAL_ROWS,
    beam_sweep,
    default_baselines,
    fold_analysis,
    run_correlations,
    sidecar_metrics,
)
from safeval.metric import MODES, ScoreReport, explain
from safeval.pipeline import Scorer
from safeval.question_bank import BankStore, atomic_write_text
from safeval.weighter import build_weighter_dataset, load_examples, save_examples, train_weighter

logger = logging.getLogger("safeval")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_BACKEND = 4


class InputError(Exception):
    pass


# ---------------------------------------------------------------- plumbing


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(path) if path else RunConfig()
    descriptors = dict(config.backends)
    if args.fixture:
        for kind in ("qa", "qg", "annotator", "weighter"):
            descriptors[kind] = parse_descriptor(kind, f"fixture:{args.fixture}")
    for kind in ("qa", "qg", "annotator", "weighter"):
        spec = getattr(args, f"{kind}_backend")
        if spec:
            descriptors[kind] = parse_descriptor(kind, spec)
    return config.with_overrides(
        backends=descriptors,
        beam_size=args.beam_size,
        filter_threshold=args.filter_threshold,
        weighter_mode=args.weighter_mode,
        recall_scoring=args.recall_scoring,
        cache_dir=args.cache_dir,
        seed=args.seed,
        parallelism=args.parallelism,
    )


def _open(config: RunConfig) -> tuple[Backends, BankStore]:
    try:
        backends = open_backends(config.backends, cache_dir=config.cache_dir, max_in_flight=config.parallelism)
    except FileNotFoundError as err:
        raise InputError(f"backend file not found: {err.filename}") from err
    except ValueError as err:
        if isinstance(err, FormatError):
            raise
        raise ConfigError(str(err)) from err
    bank_dir = Path(config.cache_dir) / "banks" if config.cache_dir else None
    return backends, BankStore(bank_dir)


def _header(command: str, config: RunConfig, backends: Backends | None) -> dict:
    return {
        "record": "header",
        "command": command,
        "safeval_version": __version__,
        "config_fingerprint": config.fingerprint(backends),
        "seed": config.seed,
    }


def _cache_stats(backends: Backends, store: BankStore) -> dict:
    seen = {}
    for b in (backends.qa, backends.qg, backends.annotator, backends.weighter):
        if isinstance(b, CachedBackend) and id(b) not in seen:
            seen[id(b)] = b
    return {
        "response_cache": {
            "hits": sum(b.hits for b in seen.values()),
            "misses": sum(b.misses for b in seen.values()),
        },
        "banks": {"loaded": store.hits, "built": store.builds},
    }


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror}") from err


def _emit(text: str, output: str | None) -> None:
    if output:
        atomic_write_text(output, text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, output: str | None) -> None:
    _emit(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", output)


def _stats(args: argparse.Namespace, stats: dict) -> None:
    line = json.dumps(stats, sort_keys=True)
    print(line, file=sys.stderr)
    if getattr(args, "stats", None):
        atomic_write_text(args.stats, line + "\n")


def _dry_run(args, config: RunConfig, **checked) -> int:
    summary = {"dry_run": True, "command": args.command, "config_fingerprint": config.fingerprint(), **checked}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- commands


def cmd_score(args: argparse.Namespace, config: RunConfig) -> int:
    document = _read_text(args.document)
    summary = _read_text(args.summary)
    if not document.strip() or not summary.strip():
        raise InputError("document and summary must be non-empty")
    mode = args.mode or config.weighter_mode
    if args.dry_run:
        return _dry_run(args, config, mode=mode)
    backends, store = _open(config)
    scorer = Scorer(backends, config.scoring, store, workers=config.parallelism)
    report = scorer.score(document, summary, mode)
    out = {"header": _header("score", config, backends), **report.to_json()}
    if args.explain:
        out["explanation"] = explain(report, config.thresholds).to_json()
    _emit_json(out, args.output)
    return EXIT_OK


def cmd_explain(args: argparse.Namespace, config: RunConfig) -> int:
    try:
        raw = json.loads(_read_text(args.report))
        report = ScoreReport.from_json(raw)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise InputError(f"not a score report: {err}") from err
    if args.dry_run:
        return _dry_run(args, config)
    explanation = explain(report, config.thresholds)
    if args.format == "json":
        _emit_json(explanation.to_json(), args.output)
    else:
        _emit(explanation.render() + "\n", args.output)
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace, config: RunConfig) -> int:
    corpus = load_corpus(args.corpus, args.format)
    modes = args.modes or list(MODES)
    if args.dry_run:
        return _dry_run(args, config, examples=len(corpus), modes=modes)
    backends, store = _open(config)
    scorer = Scorer(backends, config.scoring, store, workers=config.parallelism)
    results = scorer.score_many(((ex.example_id, ex.document, ex.summary) for ex in corpus), modes)
    lines = [json.dumps(_header("corpus", config, backends))]
    failed = 0
    for ex in sorted(corpus, key=lambda e: e.example_id):
        res = results[ex.example_id]
        if isinstance(res, Exception):
            failed += 1
            lines.append(json.dumps({"record": "error", "example_id": ex.example_id, "error": str(res)}))
            continue
        for mode in modes:
            rep = res[mode]
            lines.append(json.dumps({"example_id": ex.example_id, "metric": SAFEVAL_ROWS[mode], "score": rep.safeval}))
    _emit("\n".join(lines) + "\n", args.output)
    _stats(args, {"command": "corpus", "examples": len(corpus), "failed": failed, **_cache_stats(backends, store)})
    return EXIT_OK


def cmd_correlate(args: argparse.Namespace, config: RunConfig) -> int:
    corpus = load_corpus(args.corpus, args.format)
    metrics = [] if args.no_baselines else list(default_baselines())
    for path in args.scores or []:
        metrics.extend(sidecar_metrics(path))
    if not metrics:
        raise InputError("nothing to correlate: no baselines and no score files")
    if args.dry_run:
        return _dry_run(args, config, examples=len(corpus), metrics=[m.name for m in metrics])
    report = run_correlations(
        corpus, metrics, reference_count=args.reference_count, level=args.level, seed=config.seed
    )
    out = {"header": _header("correlate", config, None), **report.to_json()}
    _emit_json(out, args.output)
    if args.table:
        atomic_write_text(args.table, report.render())
    return EXIT_OK


def cmd_build_negatives(args: argparse.Namespace, config: RunConfig) -> int:
    triplets = load_triplets(args.input)
    if args.dry_run:
        return _dry_run(args, config, triplets=len(triplets))
    try:
        out = build_negatives(triplets, ratio=args.ratio, seed=config.seed)
    except ValueError as err:
        raise InputError(str(err)) from err
    save_triplets(out, args.output)
    _stats(args, {"command": "build-negatives", "originals": len(triplets), "negatives": len(out) - len(triplets)})
    return EXIT_OK


def cmd_build_weighter_data(args: argparse.Namespace, config: RunConfig) -> int:
    rows = []
    with Path(args.input).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows.append((str(rec["document_id"]), rec["document"], rec["summary"]))
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise FormatError(f"record {len(rows)}: {err}", path=args.input, line=lineno) from err
    if args.dry_run:
        return _dry_run(args, config, documents=len(rows))
    backends, store = _open(config)
    dataset = build_weighter_dataset(
        rows, backends, config.beam_size, filter_threshold=config.filter_threshold, store=store
    )
    save_examples(dataset.examples, args.output)
    positives = sum(ex.label for ex in dataset.examples)
    _stats(
        args,
        {
            "command": "build-weighter-data",
            "examples": len(dataset),
            "positives": positives,
            "skipped_documents": dataset.skipped_documents,
        },
    )
    return EXIT_OK


def cmd_train_weighter(args: argparse.Namespace, config: RunConfig) -> int:
    examples = load_examples(args.input)
    if args.dry_run:
        return _dry_run(args, config, examples=len(examples))
    try:
        model = train_weighter(
            examples,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            l2=args.l2,
            seed=config.seed,
            feature_mode=args.feature_mode,
        )
    except ValueError as err:
        raise InputError(str(err)) from err
    model.metadata["config_fingerprint"] = config.fingerprint()
    model.save(args.output)
    _stats(
        args,
        {
            "command": "train-weighter",
            "final_loss": model.metadata["final_loss"],
            "train_accuracy": model.metadata["train_accuracy"],
        },
    )
    return EXIT_OK


def cmd_beam_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    corpus = load_corpus(args.corpus, args.format)
    if args.dry_run:
        return _dry_run(args, config, examples=len(corpus), beam_sizes=args.k)
    backends, store = _open(config)
    scorer = Scorer(backends, config.scoring, store, workers=config.parallelism)
    result = beam_sweep(corpus, scorer, args.k, mode=args.mode or config.weighter_mode)
    _emit_json({"header": _header("beam-sweep", config, backends), **result}, args.output)
    return EXIT_OK


def cmd_fold_analysis(args: argparse.Namespace, config: RunConfig) -> int:
    corpus = load_corpus(args.corpus, args.format)
    if args.dry_run:
        return _dry_run(args, config, examples=len(corpus))
    backends, store = _open(config)
    scorer = Scorer(backends, config.scoring, store, workers=config.parallelism)
    result = fold_analysis(corpus, scorer)
    _emit_json({"header": _header("fold-analysis", config, backends), **result}, args.output)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help=f"JSON run config (default: ${CONFIG_ENV_VAR})")
    g.add_argument("--fixture", help="use one fixture file for every backend")
    for kind in ("qa", "qg", "annotator", "weighter"):
        g.add_argument(
            f"--{kind}-backend",
            metavar="SPEC",
            help="fixture:PATH, remote:URL, model:PATH or uniform",
        )
    g.add_argument("--beam-size", type=int)
    g.add_argument("--filter-threshold", type=float)
    g.add_argument("--weighter-mode", choices=["uniform", "learned"])
    g.add_argument("--recall-scoring", choices=["answerability", "f1"])
    g.add_argument("--cache-dir")
    g.add_argument("--seed", type=int)
    g.add_argument("--parallelism", type=int)
    g.add_argument("--dry-run", action="store_true", help="validate inputs and config without backend calls")
    g.add_argument("--log-level", default="WARNING")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="safeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"safeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("score", cmd_score, "score one summary against its document")
    p.add_argument("--document", required=True, help="document file, or - for stdin")
    p.add_argument("--summary", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--explain", action="store_true", help="include the per-question triage")
    p.add_argument("-o", "--output")

    p = add("explain", cmd_explain, "triage a saved score report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("-o", "--output")

    for name, func, help in (
        ("corpus", cmd_corpus, "score every summary of an annotated corpus"),
        ("correlate", cmd_correlate, "correlate metric scores with human judgments"),
        ("beam-sweep", cmd_beam_sweep, "correlation and system ranking per QG beam size"),
        ("fold-analysis", cmd_fold_analysis, "correlate important/answered folds with relevance"),
    ):
        p = add(name, func, help)
        p.add_argument("--corpus", required=True)
        p.add_argument("--format", choices=["summeval_like", "qags_like"], default="summeval_like")
        p.add_argument("-o", "--output")
        if name == "corpus":
            p.add_argument("--modes", nargs="+", choices=MODES)
            p.add_argument("--stats", help="also write the run statistics here")
        elif name == "correlate":
            p.add_argument("--scores", nargs="*", help="score sidecar files ({example_id, metric, score} lines)")
            p.add_argument("--no-baselines", action="store_true", help="skip the built-in ROUGE rows")
            p.add_argument("--reference-count", type=int)
            p.add_argument("--level", choices=["summary", "system"], default="summary")
            p.add_argument("--table", help="also write a plain-text table here")
        elif name == "beam-sweep":
            p.add_argument("--k", type=int, nargs="+", default=[1, 5, 20])
            p.add_argument("--mode", choices=MODES)

    p = add("build-negatives", cmd_build_negatives, "add context-shuffled unanswerable QA triplets")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--stats")

    p = add("build-weighter-data", cmd_build_weighter_data, "label document questions for weighter training")
    p.add_argument("--input", required=True, help="JSON lines with document_id, document, summary")
    p.add_argument("--output", required=True)
    p.add_argument("--stats")

    p = add("train-weighter", cmd_train_weighter, "train the logistic-regression weighter")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--feature-mode", choices=["question_tokens", "question_plus_doc_overlap"], default="question_tokens")
    p.add_argument("--stats")
    return parser


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _resolve_config(args)
        return args.func(args, config)
    except ConfigError as err:
        return _fail("usage", str(err), EXIT_USAGE)
    except (BackendError, ScoringError) as err:
        return _fail("backend", str(err), EXIT_BACKEND)
    except (FormatError, InputError, FileNotFoundError) as err:
        return _fail("input", str(err), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
