"""Summary-level correlation of metric scores with human judgments."""

from __future__ import annotations

import json
import logging
import math
import random
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Protocol, Sequence

from safeval.errors import FormatError, SafevalError, UndefinedCorrelationError
from safeval.harness.corpus import DIMENSIONS, AnnotatedExample
from safeval.harness.rouge import best_over_references, rouge_l, rouge_n_recall
from safeval.harness.stats import pearson
from safeval.metric import FoldTag
from safeval.pipeline import Scorer

logger = logging.getLogger(__name__)

Level = Literal["summary", "system"]


class Metric(Protocol):
    name: str
    references_needed: int

    def __call__(self, example: AnnotatedExample, references: Sequence[str]) -> float: ...


@dataclass(frozen=True)
class RougeMetric:
    name: str
    n: int | None = 1  # None selects ROUGE-L
    references_needed: int = 1

    def __call__(self, example: AnnotatedExample, references: Sequence[str]) -> float:
        if self.n is None:
            return best_over_references(rouge_l, references, example.summary)
        return best_over_references(rouge_n_recall, references, example.summary, n=self.n)


@dataclass(frozen=True)
class ScoreTable:
    """Precomputed per-example scores, e.g. from a sidecar file."""

    name: str
    scores: Mapping[str, float]
    references_needed: int = 0

    def __call__(self, example: AnnotatedExample, references: Sequence[str]) -> float:
        try:
            return self.scores[example.example_id]
        except KeyError:
            raise KeyError(f"no {self.name} score for {example.example_id}") from None


def default_baselines() -> list[RougeMetric]:
    return [RougeMetric("ROUGE-1", 1), RougeMetric("ROUGE-2", 2), RougeMetric("ROUGE-L", None)]


SAFEVAL_ROWS: dict[str, str] = {
    "uniform": "SAFEval_W=uniform",
    "learned": "SAFEval_W=learned",
    "precision_only": "SAFEval precision only",
    "recall_only": "SAFEval recall only",
}


def safeval_metrics(
    corpus: Sequence[AnnotatedExample], scorer: Scorer, modes: Sequence[str] = tuple(SAFEVAL_ROWS)
) -> list[ScoreTable]:
    """Score a corpus once and expose each mode as a reference-less metric.

    Summaries whose scoring failed are missing from the tables and therefore
    excluded by :func:`run_correlations`.
    """
    results = scorer.score_many(((ex.example_id, ex.document, ex.summary) for ex in corpus), modes)
    tables = []
    for mode in modes:
        scores = {k: v[mode].safeval for k, v in results.items() if not isinstance(v, Exception)}
        tables.append(ScoreTable(SAFEVAL_ROWS[mode], scores))
    return tables


@dataclass(frozen=True)
class Cell:
    metric: str
    dimension: str
    r: float | None
    n: int
    error: str | None = None


@dataclass
class CorrelationReport:
    cells: dict[tuple[str, str], Cell]
    metrics: list[str]
    dimensions: list[str]
    n: int
    reference_count_used: int | None
    level: str = "summary"
    excluded: dict[str, int] = field(default_factory=dict)
    references_needed: dict[str, int] = field(default_factory=dict)

    @property
    def rows(self) -> dict[tuple[str, str], float | None]:
        return {key: cell.r for key, cell in self.cells.items()}

    def r(self, metric: str, dimension: str) -> float | None:
        return self.cells[(metric, dimension)].r

    def average(self, metric: str) -> float | None:
        vals = [self.cells[(metric, d)].r for d in self.dimensions]
        vals = [v for v in vals if v is not None]
        return math.fsum(vals) / len(vals) if vals else None

    def to_json(self) -> dict:
        rows = []
        for m in self.metrics:
            rows.append(
                {
                    "metric": m,
                    "n_refs": self.reference_count_used if self.references_needed.get(m, 0) else 0,
                    "n": {d: self.cells[(m, d)].n for d in self.dimensions},
                    "excluded": self.excluded.get(m, 0),
                    "pearson": {d: self.cells[(m, d)].r for d in self.dimensions},
                    "average": self.average(m),
                    "errors": {d: self.cells[(m, d)].error for d in self.dimensions if self.cells[(m, d)].error},
                }
            )
        return {
            "level": self.level,
            "n": self.n,
            "reference_count_used": self.reference_count_used,
            "dimensions": list(self.dimensions),
            "rows": rows,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def render(self) -> str:
        """Plain-text table of correlations x100, one row per metric."""
        head = ["Metric", "#Ref", *(d.capitalize() for d in self.dimensions), "Average"]
        body = []
        for m in self.metrics:
            refs = self.reference_count_used if self.references_needed.get(m, 0) else 0
            vals = [self.cells[(m, d)].r for d in self.dimensions] + [self.average(m)]
            body.append([m, str(refs if refs is not None else "all"), *(_pct(v) for v in vals)])
        widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
                 for row in [head, *body]]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def _pct(v: float | None) -> str:
    return "n/a" if v is None else f"{100 * v:.1f}"


def _correlate(points: list[tuple[str, float, float]], level: Level) -> tuple[float, int]:
    """``points`` are (system_id, metric, human) triples."""
    if level == "system":
        groups: dict[str, list[tuple[float, float]]] = defaultdict(list)
        for sys_id, m, h in points:
            groups[sys_id].append((m, h))
        xs = [math.fsum(m for m, _ in g) / len(g) for _, g in sorted(groups.items())]
        ys = [math.fsum(h for _, h in g) / len(g) for _, g in sorted(groups.items())]
    else:
        xs = [m for _, m, _ in points]
        ys = [h for _, _, h in points]
    return pearson(xs, ys), len(xs)


def _select_references(ex: AnnotatedExample, count: int | None, seed: int) -> tuple[str, ...]:
    if count is None or count >= len(ex.references):
        return ex.references
    rng = random.Random(f"{seed}:{ex.example_id}")
    idx = sorted(rng.sample(range(len(ex.references)), count))
    return tuple(ex.references[i] for i in idx)


def run_correlations(
    corpus: Sequence[AnnotatedExample],
    metrics: Sequence[Metric],
    *,
    dimensions: Sequence[str] = DIMENSIONS,
    reference_count: int | None = None,
    level: Level = "summary",
    seed: int = 0,
) -> CorrelationReport:
    """Pearson r of every metric against every human dimension.

    Reference-based metrics see ``reference_count`` references per example
    (a seeded subset; all when ``None``) and skip examples with fewer.
    Examples are processed in ``example_id`` order, so the report does not
    depend on corpus record order. Per-example metric failures are excluded
    and counted; undefined correlations are reported per cell.
    """
    if level not in ("summary", "system"):
        raise ValueError(f"unknown level {level!r}")
    examples = sorted(corpus, key=lambda ex: ex.example_id)
    cells: dict[tuple[str, str], Cell] = {}
    excluded: dict[str, int] = {}
    for metric in metrics:
        scored: list[tuple[AnnotatedExample, float]] = []
        n_bad = 0
        for ex in examples:
            refs = _select_references(ex, reference_count, seed) if metric.references_needed else ()
            if metric.references_needed and len(refs) < max(metric.references_needed, reference_count or 0):
                n_bad += 1
                continue
            try:
                value = float(metric(ex, refs))
            except (SafevalError, KeyError, ValueError) as err:
                logger.debug("metric %s failed on %s: %s", metric.name, ex.example_id, err)
                n_bad += 1
                continue
            if not math.isfinite(value):
                n_bad += 1
                continue
            scored.append((ex, value))
        excluded[metric.name] = n_bad
        for dim in dimensions:
            points = [(ex.system_id, v, ex.human[dim]) for ex, v in scored if dim in ex.human]
            try:
                r, n = _correlate(points, level)
                cells[(metric.name, dim)] = Cell(metric.name, dim, r, n)
            except UndefinedCorrelationError as err:
                n = len({sys_id for sys_id, _, _ in points}) if level == "system" else len(points)
                cells[(metric.name, dim)] = Cell(metric.name, dim, None, n, str(err))
    return CorrelationReport(
        cells=cells,
        metrics=[m.name for m in metrics],
        dimensions=list(dimensions),
        n=len(examples),
        reference_count_used=reference_count,
        level=level,
        excluded=excluded,
        references_needed={m.name: m.references_needed for m in metrics},
    )


def reference_study(
    corpus: Sequence[AnnotatedExample],
    metrics: Sequence[Metric],
    counts: Iterable[int],
    *,
    n_subsamples: int = 5,
    dimensions: Sequence[str] = DIMENSIONS,
    seed: int = 0,
) -> dict:
    """Mean and variance of r per reference count over seeded reference subsamples."""
    out: dict = {"counts": [], "dimensions": list(dimensions)}
    for count in counts:
        per_metric: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
        for s in range(n_subsamples):
            report = run_correlations(
                corpus, metrics, dimensions=dimensions, reference_count=count, seed=seed * 1000 + s
            )
            for (m, d), cell in report.cells.items():
                if cell.r is not None:
                    per_metric[m][d].append(cell.r)
        entry = {"count": count, "metrics": {}}
        for m in (metric.name for metric in metrics):
            entry["metrics"][m] = {
                d: _mean_var(per_metric[m][d]) for d in dimensions
            }
        out["counts"].append(entry)
    return out


def _mean_var(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "variance": None, "samples": 0}
    return {"mean": statistics.fmean(values), "variance": statistics.pvariance(values), "samples": len(values)}


FOLDS: tuple[tuple[bool, bool], ...] = ((True, True), (True, False), (False, True))


def fold_percentages(report_rows, thresholds=None) -> dict[tuple[bool, bool], float] | None:
    """Percentage of document questions in each (important, answered) fold."""
    rows = list(report_rows)
    if not rows:
        return None
    counts: dict[tuple[bool, bool], int] = defaultdict(int)
    for wq in rows:
        tag = wq.fold if thresholds is None else FoldTag.of(wq.weight, wq.prob_unanswerable, thresholds)
        counts[(tag.important, tag.answered)] += 1
    return {fold: 100.0 * counts[fold] / len(rows) for fold in FOLDS}


def fold_analysis(corpus: Sequence[AnnotatedExample], scorer: Scorer, dimension: str = "relevance") -> dict:
    """Correlate per-summary fold percentages with a human dimension.

    Uses learned weights; summaries with no document questions are excluded.
    """
    examples = sorted((ex for ex in corpus if dimension in ex.human), key=lambda ex: ex.example_id)
    results = scorer.score_many(((ex.example_id, ex.document, ex.summary) for ex in examples), ["learned"])
    series: dict[tuple[bool, bool], list[float]] = {fold: [] for fold in FOLDS}
    human: list[float] = []
    excluded = 0
    for ex in examples:
        res = results[ex.example_id]
        pct = None if isinstance(res, Exception) else fold_percentages(res["learned"].recall_rows)
        if pct is None:
            excluded += 1
            continue
        for fold in FOLDS:
            series[fold].append(pct[fold])
        human.append(ex.human[dimension])
    rows = []
    for important, answered in FOLDS:
        row = {"important": important, "answered": answered, "pearson": None, "error": None}
        try:
            row["pearson"] = pearson(series[(important, answered)], human)
        except UndefinedCorrelationError as err:
            row["error"] = str(err)
        rows.append(row)
    return {
        "dimension": dimension,
        "thresholds": {"importance": scorer.config.thresholds.importance, "answered": scorer.config.thresholds.answered},
        "n": len(human),
        "excluded": excluded,
        "rows": rows,
    }


def system_ranking(corpus: Sequence[AnnotatedExample], scores: Mapping[str, float]) -> list[str]:
    """System ids ordered by mean score, best first; ties broken by id."""
    per_system: dict[str, list[float]] = defaultdict(list)
    for ex in corpus:
        if ex.example_id in scores:
            per_system[ex.system_id].append(scores[ex.example_id])
    means = {s: math.fsum(v) / len(v) for s, v in per_system.items()}
    return sorted(means, key=lambda s: (-means[s], s))


def beam_sweep(
    corpus: Sequence[AnnotatedExample],
    scorer: Scorer,
    k_values: Sequence[int],
    *,
    mode: str = "learned",
    dimensions: Sequence[str] = DIMENSIONS,
) -> dict:
    """Correlations and system ranking of one SAFEval mode per QG beam size."""
    entries = []
    for k in k_values:
        scorer_k = scorer.with_beam_size(k)
        table = safeval_metrics(corpus, scorer_k, [mode])[0]
        report = run_correlations(corpus, [table], dimensions=dimensions)
        entries.append(
            {
                "beam_size": k,
                "pearson": {d: report.r(table.name, d) for d in dimensions},
                "average": report.average(table.name),
                "system_ranking": system_ranking(corpus, table.scores),
            }
        )
    rankings = [tuple(e["system_ranking"]) for e in entries]
    return {
        "mode": mode,
        "entries": entries,
        "rank_order_stable": len(set(rankings)) <= 1,
    }


def load_sidecar(path: str | Path) -> dict[str, dict[str, float]]:
    """Read ``{example_id, metric, score}`` lines into metric -> id -> score."""
    out: dict[str, dict[str, float]] = defaultdict(dict)
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if rec.get("record") in ("header", "error"):
                    continue
                out[str(rec["metric"])][str(rec["example_id"])] = float(rec["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise FormatError(f"bad sidecar record: {err}", path=str(path), line=lineno) from err
    return dict(out)


def sidecar_metrics(path: str | Path) -> list[ScoreTable]:
    return [ScoreTable(name, scores) for name, scores in load_sidecar(path).items()]
