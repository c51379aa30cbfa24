"""Meta-evaluation: corpora, baselines and correlation with human judgments."""

from safeval.harness.corpus import DIMENSIONS, AnnotatedExample, load_corpus
from safeval.harness.correlate import (
    CorrelationReport,
    RougeMetric,
    ScoreTable,
    beam_sweep,
    default_baselines,
    fold_analysis,
    reference_study,
    run_correlations,
    safeval_metrics,
    sidecar_metrics,
)
from safeval.harness.rouge import rouge_l, rouge_n_recall
from safeval.harness.stats import pearson

__all__ = [
    "DIMENSIONS",
    "AnnotatedExample",
    "CorrelationReport",
    "RougeMetric",
    "ScoreTable",
    "beam_sweep",
    "default_baselines",
    "fold_analysis",
    "load_corpus",
    "pearson",
    "reference_study",
    "rouge_l",
    "rouge_n_recall",
    "run_correlations",
    "safeval_metrics",
    "sidecar_metrics",
]
