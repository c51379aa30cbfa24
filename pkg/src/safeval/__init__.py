"""QA-based, reference-free factual consistency scoring for summaries."""

from __future__ import annotations

__version__ = "0.1.0"

from safeval.backends import Backends, FixtureBackend, RemoteBackend, open_backends
from safeval.metric import MODES, ScoreReport, ScoringConfig, Thresholds, explain, harmonic_mean, safeval_score
from safeval.pipeline import Scorer
from safeval.question_bank import BankStore, QuestionBank, build_question_bank
from safeval.text_processing import UNANSWERABLE, answer_f1, f1_overlap, normalize_answer

__all__ = [
    "MODES",
    "UNANSWERABLE",
    "BankStore",
    "Backends",
    "FixtureBackend",
    "QuestionBank",
    "RemoteBackend",
    "ScoreReport",
    "Scorer",
    "ScoringConfig",
    "Thresholds",
    "__version__",
    "answer_f1",
    "build_question_bank",
    "explain",
    "f1_overlap",
    "harmonic_mean",
    "normalize_answer",
    "open_backends",
    "safeval_score",
]
